use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::cache::{read_entry, write_entry, CacheEntry, CACHE_TTL_DEFAULT_SECS};
use super::ratelimit::{Clock, RateLimiter, SystemClock};
use super::{
    fingerprint, recency_order, token_set_ratio, LookupQuery, MetadataBackend, MetadataError, PaperLookup,
    PaperRecord, QueryKind, TITLE_MATCH_THRESHOLD,
};

/// Where responses come from.
#[derive(Clone)]
pub enum Source {
    Backend(Arc<dyn MetadataBackend>),
    /// Recorded responses only; any miss is an error.
    Fixture(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub requests_per_sec: f64,
    pub cache_dir: Option<PathBuf>,
    pub ttl_secs: u64,
    /// Also write every backend response here in fixture format.
    pub record_dir: Option<PathBuf>,
    pub title_threshold: f64,
    pub title_search_limit: usize,
    pub max_retries: u32,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            requests_per_sec: 1.0,
            cache_dir: None,
            ttl_secs: CACHE_TTL_DEFAULT_SECS,
            record_dir: None,
            title_threshold: TITLE_MATCH_THRESHOLD,
            title_search_limit: 10,
            max_retries: 2,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum Response {
    Ok { data: serde_json::Value },
    NotFound,
}

pub struct MetadataClient {
    source: Source,
    config: ClientConfig,
    clock: Arc<dyn Clock>,
    limiter: RateLimiter,
    io: Mutex<()>,
    log: Mutex<Vec<LookupQuery>>,
    backend_calls: Mutex<usize>,
}

impl MetadataClient {
    pub fn new(source: Source, config: ClientConfig) -> Self {
        Self::with_clock(source, config, Arc::new(SystemClock::default()))
    }

    pub fn with_clock(source: Source, config: ClientConfig, clock: Arc<dyn Clock>) -> Self {
        let limiter = RateLimiter::new(config.requests_per_sec, clock.clone());
        MetadataClient {
            source,
            config,
            clock,
            limiter,
            io: Mutex::new(()),
            log: Mutex::new(Vec::new()),
            backend_calls: Mutex::new(0),
        }
    }

    pub fn fixture(dir: impl Into<PathBuf>) -> Self {
        Self::new(Source::Fixture(dir.into()), ClientConfig::default())
    }

    pub fn is_fixture_mode(&self) -> bool {
        matches!(self.source, Source::Fixture(_))
    }

    /// Every query issued so far, including cache hits.
    pub fn query_log(&self) -> Vec<LookupQuery> {
        self.log.lock().unwrap().clone()
    }

    /// Number of requests that reached the backend.
    pub fn backend_calls(&self) -> usize {
        *self.backend_calls.lock().unwrap()
    }

    /// Raw response payload for `query`, from fixture, cache or backend.
    pub fn fetch_raw(&self, query: &LookupQuery) -> Result<String, MetadataError> {
        query.validate()?;
        self.log.lock().unwrap().push(query.clone());
        let fp = fingerprint(query);

        let backend = match &self.source {
            Source::Fixture(dir) => {
                let _guard = self.io.lock().unwrap();
                return match read_entry(dir, &fp)? {
                    Some(entry) => Ok(entry.payload),
                    None => Err(MetadataError::FixtureMiss { kind: query.kind, key: query.key.clone(), fingerprint: fp }),
                };
            }
            Source::Backend(b) => b.clone(),
        };

        if let Some(dir) = &self.config.cache_dir {
            let _guard = self.io.lock().unwrap();
            if let Some(entry) = read_entry(dir, &fp)? {
                if entry.is_fresh(self.clock.unix_secs()) {
                    debug!(fingerprint = %fp, "metadata cache hit");
                    return Ok(entry.payload);
                }
            }
        }

        let response = self.call_backend(backend.as_ref(), query)?;
        let payload = serde_json::to_string(&response).expect("response serializes");
        let entry = CacheEntry {
            fingerprint: fp,
            query: query.clone(),
            fetched_at: self.clock.unix_secs(),
            ttl: self.config.ttl_secs,
            payload: payload.clone(),
        };
        let _guard = self.io.lock().unwrap();
        for dir in [&self.config.cache_dir, &self.config.record_dir].into_iter().flatten() {
            write_entry(dir, &entry)?;
        }
        Ok(payload)
    }

    fn call_backend(&self, backend: &dyn MetadataBackend, q: &LookupQuery) -> Result<Response, MetadataError> {
        let mut attempt = 0;
        loop {
            self.limiter.acquire();
            *self.backend_calls.lock().unwrap() += 1;
            let result = match q.kind {
                QueryKind::ByTitle => backend.search_title(&q.key, q.limit).map(|v| Some(to_value(&v))),
                QueryKind::ById => backend.paper(&q.key).map(|p| p.map(|p| to_value(&p))),
                QueryKind::CitationsOf => backend.citations(&q.key, q.limit).map(|v| Some(to_value(&v))),
            };
            match result {
                Ok(Some(data)) => return Ok(Response::Ok { data }),
                Ok(None) => return Ok(Response::NotFound),
                Err(MetadataError::NotFound(_)) => return Ok(Response::NotFound),
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    attempt += 1;
                    warn!(error = %e, attempt, "retrying metadata request");
                    self.clock.sleep(Duration::from_secs(1 << attempt));
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn fetch<T: serde::de::DeserializeOwned>(&self, q: &LookupQuery) -> Result<Option<T>, MetadataError> {
        let payload = self.fetch_raw(q)?;
        let response: Response = serde_json::from_str(&payload).map_err(|e| MetadataError::Decode(e.to_string()))?;
        match response {
            Response::Ok { data } => serde_json::from_value(data).map(Some).map_err(|e| MetadataError::Decode(e.to_string())),
            Response::NotFound => Ok(None),
        }
    }

    /// Best title match at or above the configured threshold.
    pub fn lookup_title(&self, title: &str) -> Result<Option<PaperRecord>, MetadataError> {
        if title.trim().is_empty() {
            return Err(MetadataError::InvalidQuery("empty title".into()));
        }
        let q = LookupQuery::by_title(title, self.config.title_search_limit);
        let candidates: Vec<PaperRecord> = self.fetch(&q)?.unwrap_or_default();
        let mut best: Option<(f64, PaperRecord)> = None;
        for c in candidates {
            let score = token_set_ratio(title, &c.title);
            if score >= self.config.title_threshold && best.as_ref().map_or(true, |(b, _)| score > *b) {
                best = Some((score, c));
            }
        }
        Ok(best.map(|(_, p)| p))
    }

    pub fn lookup_id(&self, paper_id: &str) -> Result<Option<PaperRecord>, MetadataError> {
        self.fetch(&LookupQuery::by_id(paper_id)).map(Option::flatten)
    }

    /// At most `limit` citing papers, newest first.
    pub fn citations_of(&self, paper_id: &str, limit: usize) -> Result<Vec<PaperRecord>, MetadataError> {
        let q = LookupQuery::citations_of(paper_id, limit);
        let mut papers: Vec<PaperRecord> =
            self.fetch(&q)?.ok_or_else(|| MetadataError::NotFound(paper_id.to_string()))?;
        papers.sort_by(recency_order);
        papers.truncate(limit);
        Ok(papers)
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("record serializes")
}

impl PaperLookup for MetadataClient {
    fn lookup_id(&self, paper_id: &str) -> Result<Option<PaperRecord>, MetadataError> {
        MetadataClient::lookup_id(self, paper_id)
    }

    fn lookup_title(&self, title: &str) -> Result<Option<PaperRecord>, MetadataError> {
        MetadataClient::lookup_title(self, title)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Corpus, CorpusBackend, CorpusPaper, ManualClock};
    use super::*;

    fn paper(id: &str, title: &str, year: i32, cites: &[&str]) -> CorpusPaper {
        CorpusPaper {
            record: PaperRecord {
                paper_id: id.into(),
                title: title.into(),
                year: Some(year),
                embedding: None,
                tldr: None,
                url: None,
                citation_contexts: vec![],
            },
            cites: cites.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn corpus() -> Corpus {
        Corpus {
            papers: vec![
                paper("P0", "Generalized Additive Models for Interpretable Learning", 2015, &[]),
                paper("C1", "Citing one", 2019, &["P0"]),
                paper("C2", "Citing two", 2022, &["P0"]),
                paper("C3", "Citing three", 2021, &["P0"]),
            ],
        }
    }

    fn client(config: ClientConfig) -> MetadataClient {
        MetadataClient::with_clock(
            Source::Backend(Arc::new(CorpusBackend::new(corpus()))),
            config,
            Arc::new(ManualClock::new(1_700_000_000)),
        )
    }

    #[test]
    fn exact_and_noisy_titles_match() {
        let c = client(ClientConfig::default());
        let exact = c.lookup_title("Generalized Additive Models for Interpretable Learning").unwrap();
        assert_eq!(exact.unwrap().paper_id, "P0");
        let noisy = c.lookup_title("GENERALIZED additive-models, for interpretable learning.").unwrap();
        assert_eq!(noisy.unwrap().paper_id, "P0");
        assert_eq!(c.lookup_title("zxq wub flarn").unwrap(), None);
        assert!(matches!(c.lookup_title("  "), Err(MetadataError::InvalidQuery(_))));
    }

    #[test]
    fn citations_are_recency_ordered_and_truncated() {
        let c = client(ClientConfig::default());
        let all: Vec<_> = c.citations_of("P0", 10).unwrap().into_iter().map(|p| p.paper_id).collect();
        assert_eq!(all, ["C2", "C3", "C1"]);
        let two: Vec<_> = c.citations_of("P0", 2).unwrap().into_iter().map(|p| p.paper_id).collect();
        assert_eq!(two, ["C2", "C3"]);
        assert!(matches!(c.citations_of("nope", 10), Err(MetadataError::NotFound(_))));
        assert!(matches!(c.citations_of("P0", 1001), Err(MetadataError::InvalidQuery(_))));
    }

    #[test]
    fn cache_hits_are_byte_identical_until_expiry() {
        let dir = tempfile::tempdir().unwrap();
        let clock = Arc::new(ManualClock::new(1_700_000_000));
        let c = MetadataClient::with_clock(
            Source::Backend(Arc::new(CorpusBackend::new(corpus()))),
            ClientConfig { cache_dir: Some(dir.path().into()), ttl_secs: 100, ..Default::default() },
            clock.clone(),
        );
        let q = LookupQuery::citations_of("P0", 1000);
        let first = c.fetch_raw(&q).unwrap();
        let second = c.fetch_raw(&q).unwrap();
        assert_eq!(first, second);
        assert_eq!(c.backend_calls(), 1);
        clock.advance(Duration::from_secs(101));
        c.fetch_raw(&q).unwrap();
        assert_eq!(c.backend_calls(), 2);
    }

    #[test]
    fn fixture_mode_replays_recordings_and_fails_on_miss() {
        let dir = tempfile::tempdir().unwrap();
        let recorder = client(ClientConfig { record_dir: Some(dir.path().into()), ..Default::default() });
        let recorded = recorder.fetch_raw(&LookupQuery::by_id("P0")).unwrap();
        recorder.lookup_id("nope").unwrap();

        let replay = MetadataClient::fixture(dir.path());
        assert_eq!(replay.fetch_raw(&LookupQuery::by_id("P0")).unwrap(), recorded);
        assert_eq!(replay.fetch_raw(&LookupQuery::by_id("P0")).unwrap(), recorded);
        assert_eq!(replay.lookup_id("P0").unwrap().unwrap().paper_id, "P0");
        assert_eq!(replay.lookup_id("nope").unwrap(), None);
        assert!(matches!(replay.lookup_id("P1"), Err(MetadataError::FixtureMiss { .. })));
        assert_eq!(replay.backend_calls(), 0);
    }

    struct Flaky {
        failures: Mutex<u32>,
    }

    impl MetadataBackend for Flaky {
        fn search_title(&self, _: &str, _: usize) -> Result<Vec<PaperRecord>, MetadataError> {
            Ok(vec![])
        }
        fn paper(&self, _: &str) -> Result<Option<PaperRecord>, MetadataError> {
            let mut f = self.failures.lock().unwrap();
            if *f > 0 {
                *f -= 1;
                return Err(MetadataError::RateLimited);
            }
            Ok(None)
        }
        fn citations(&self, _: &str, _: usize) -> Result<Vec<PaperRecord>, MetadataError> {
            Err(MetadataError::Network("down".into()))
        }
    }

    #[test]
    fn retryable_errors_are_retried_then_surface() {
        let c = MetadataClient::with_clock(
            Source::Backend(Arc::new(Flaky { failures: Mutex::new(2) })),
            ClientConfig::default(),
            Arc::new(ManualClock::new(0)),
        );
        assert_eq!(c.lookup_id("x").unwrap(), None);
        assert_eq!(c.backend_calls(), 3);
        let err = c.citations_of("x", 5).unwrap_err();
        assert!(err.is_retryable());
    }
}
