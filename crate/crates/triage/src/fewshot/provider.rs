//! Embedding providers: a deterministic offline feature-hashing embedder
//! and a client for a remote embedding service.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{run_pipeline, Lexicon, PipelineConfig};
use crate::seeding::fnv1a;

/// Maximum number of texts per request to a remote embedding service.
pub const EMBED_BATCH_CAP: usize = 64;

/// A fixed-dimension text embedder. Implementations must be deterministic
/// for a given configuration.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>>;

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        Ok(self.embed_batch(&[text])?.pop().unwrap())
    }
}

/// Signed feature hashing over preprocessed tokens, L2-normalized. An
/// offline stand-in for a sentence-transformer service with the same
/// interface.
pub struct HashedEmbedder {
    name: String,
    dim: usize,
    seed: u64,
    config: PipelineConfig,
    lexicon: Lexicon,
}

impl HashedEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < 8 {
            return Err(Error::invalid(format!(
                "hashed embedder needs dim >= 8, got {dim}"
            )));
        }
        Ok(HashedEmbedder {
            name: format!("hashed-{dim}-seed{seed}"),
            dim,
            seed,
            config: PipelineConfig::default(),
            lexicon: Lexicon::builtin(),
        })
    }

    fn bucket_and_sign(&self, token: &str) -> (usize, f64) {
        let mut bytes = Vec::with_capacity(8 + token.len());
        bytes.extend_from_slice(&self.seed.to_le_bytes());
        bytes.extend_from_slice(token.as_bytes());
        let h = fnv1a(&bytes);
        let bucket = (h % self.dim as u64) as usize;
        let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
        (bucket, sign)
    }
}

impl EmbeddingProvider for HashedEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        Ok(texts
            .iter()
            .map(|text| {
                let mut values = vec![0.0f64; self.dim];
                for token in run_pipeline(text, &self.config, &self.lexicon) {
                    let (bucket, sign) = self.bucket_and_sign(token.as_str());
                    values[bucket] += sign;
                }
                let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for v in &mut values {
                        *v /= norm;
                    }
                }
                values
            })
            .collect())
    }
}

/// Transport used by [`RemoteEmbedder`]; swap in a fake for tests.
pub trait HttpPostJson: Send + Sync {
    /// POST `body` as JSON to `url` and return the raw response body.
    fn post_json(&self, url: &str, body: &str) -> std::result::Result<String, String>;
}

/// Real HTTP transport.
pub struct UreqTransport {
    timeout: Duration,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        UreqTransport { timeout }
    }
}

impl HttpPostJson for UreqTransport {
    fn post_json(&self, url: &str, body: &str) -> std::result::Result<String, String> {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        agent
            .post(url)
            .set("Content-Type", "application/json")
            .send_string(body)
            .map_err(|e| e.to_string())?
            .into_string()
            .map_err(|e| e.to_string())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
    dim: usize,
}

/// Client for an embedding service speaking
/// `POST {"texts": [...]}` -> `{"embeddings": [[...]], "dim": N}`.
/// Batches are capped at [`EMBED_BATCH_CAP`] texts; transport failures are
/// retried with exponential backoff before being surfaced.
pub struct RemoteEmbedder {
    name: String,
    endpoint: String,
    dim: usize,
    max_retries: u32,
    initial_backoff: Duration,
    transport: Arc<dyn HttpPostJson>,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, dim: usize, timeout: Duration) -> Self {
        Self::with_transport(endpoint, dim, Arc::new(UreqTransport::new(timeout)))
    }

    pub fn with_transport(
        endpoint: impl Into<String>,
        dim: usize,
        transport: Arc<dyn HttpPostJson>,
    ) -> Self {
        let endpoint = endpoint.into();
        RemoteEmbedder {
            name: format!("remote-{endpoint}"),
            endpoint,
            dim,
            max_retries: 3,
            initial_backoff: Duration::from_millis(200),
            transport,
        }
    }

    pub fn with_retries(mut self, max_retries: u32, initial_backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.initial_backoff = initial_backoff;
        self
    }

    fn request_with_retries(&self, body: &str) -> Result<String> {
        let mut backoff = self.initial_backoff;
        let attempts = self.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            match self.transport.post_json(&self.endpoint, body) {
                Ok(response) => return Ok(response),
                Err(e) => {
                    log::warn!(
                        "embedding request attempt {}/{} failed: {e}",
                        attempt + 1,
                        attempts
                    );
                    last_error = e;
                    if attempt + 1 < attempts {
                        std::thread::sleep(backoff);
                        backoff *= 2;
                    }
                }
            }
        }
        Err(Error::Transport {
            attempts,
            message: last_error,
        })
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(EMBED_BATCH_CAP) {
            let body = serde_json::to_string(&EmbedRequest { texts: chunk })?;
            let raw = self.request_with_retries(&body)?;
            let response: EmbedResponse = serde_json::from_str(&raw)
                .map_err(|e| Error::invalid(format!("bad embedding response: {e}")))?;
            if response.dim != self.dim || response.embeddings.len() != chunk.len() {
                return Err(Error::DimMismatch {
                    expected: self.dim,
                    got: response.dim,
                });
            }
            for v in &response.embeddings {
                if v.len() != self.dim {
                    return Err(Error::DimMismatch {
                        expected: self.dim,
                        got: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("remote embedding".into()));
                }
            }
            out.extend(response.embeddings);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    #[test]
    fn hashed_embedder_is_deterministic_and_normalized() {
        let p = HashedEmbedder::new(64, 7).unwrap();
        let a = p.embed("No erosive lesion detected in the maxilla.").unwrap();
        let b = p.embed("No erosive lesion detected in the maxilla.").unwrap();
        assert_eq!(a, b);
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn hashed_embedder_rejects_tiny_dim() {
        assert!(HashedEmbedder::new(4, 0).is_err());
    }

    #[test]
    fn disjoint_token_sets_have_low_cosine() {
        // evaluated at the shipped default seed used across the test suite
        let p = HashedEmbedder::new(256, 7).unwrap();
        let a = p.embed("sarcomatosis osteomyelitis chondrosarcoma expansile").unwrap();
        let b = p.embed("mesiodens supernumerary retained palatal").unwrap();
        let cos: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!(cos.abs() < 0.5, "cosine {cos} unexpectedly high");
    }

    struct ScriptedTransport {
        calls: AtomicU32,
        fail_times: u32,
        response: String,
    }

    impl HttpPostJson for ScriptedTransport {
        fn post_json(&self, _url: &str, _body: &str) -> std::result::Result<String, String> {
            let call = self.calls.fetch_add(1, Ordering::SeqCst);
            if call < self.fail_times {
                Err("connection refused".into())
            } else {
                Ok(self.response.clone())
            }
        }
    }

    fn fixed_response(n: usize, dim: usize) -> String {
        let embeddings: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..dim).map(|j| (i * dim + j) as f64).collect())
            .collect();
        serde_json::to_string(&serde_json::json!({"embeddings": embeddings, "dim": dim})).unwrap()
    }

    #[test]
    fn remote_embedder_passes_through_fixed_vectors() {
        let transport = Arc::new(ScriptedTransport {
            calls: AtomicU32::new(0),
            fail_times: 0,
            response: fixed_response(3, 4),
        });
        let p = RemoteEmbedder::with_transport("http://embedder.test/embed", 4, transport);
        let got = p.embed_batch(&["a", "b", "c"]).unwrap();
        assert_eq!(got.len(), 3);
        assert_eq!(got[0], vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(got[2], vec![8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn remote_embedder_rejects_wrong_dim() {
        let transport = Arc::new(ScriptedTransport {
            calls: AtomicU32::new(0),
            fail_times: 0,
            response: fixed_response(1, 5),
        });
        let p = RemoteEmbedder::with_transport("http://embedder.test/embed", 4, transport);
        match p.embed("a") {
            Err(Error::DimMismatch { expected: 4, got: 5 }) => {}
            other => panic!("expected dim mismatch, got {other:?}"),
        }
    }

    #[test]
    fn remote_embedder_retries_then_succeeds() {
        let transport = Arc::new(ScriptedTransport {
            calls: AtomicU32::new(0),
            fail_times: 2,
            response: fixed_response(1, 4),
        });
        let p = RemoteEmbedder::with_transport("http://embedder.test/embed", 4, transport.clone())
            .with_retries(3, Duration::from_millis(1));
        assert!(p.embed("a").is_ok());
        assert_eq!(transport.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn remote_embedder_exhausts_retries() {
        let transport = Arc::new(ScriptedTransport {
            calls: AtomicU32::new(0),
            fail_times: 100,
            response: fixed_response(1, 4),
        });
        let p = RemoteEmbedder::with_transport("http://embedder.test/embed", 4, transport.clone())
            .with_retries(2, Duration::from_millis(1));
        match p.embed("a") {
            Err(Error::Transport { attempts: 3, .. }) => {}
            other => panic!("expected transport failure, got {other:?}"),
        }
        assert_eq!(transport.calls.load(Ordering::SeqCst), 3);
    }
}
