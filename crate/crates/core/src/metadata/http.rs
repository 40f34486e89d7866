//! Backend for a Semantic-Scholar-style graph API.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;

use super::{CitationSnippet, MetadataBackend, MetadataError, PaperRecord};
use crate::vector::EmbeddingVector;

const PAPER_FIELDS: &str = "paperId,title,year,url,tldr,embedding.specter_v2";
const TIMEOUT_SECS: u64 = 30;

pub struct HttpBackend {
    base_url: String,
    api_key: Option<String>,
    client: Client,
}

#[derive(Debug, Deserialize)]
struct ApiPaper {
    #[serde(rename = "paperId")]
    paper_id: Option<String>,
    title: Option<String>,
    year: Option<i32>,
    url: Option<String>,
    tldr: Option<ApiText>,
    embedding: Option<ApiEmbedding>,
}

#[derive(Debug, Deserialize)]
struct ApiText {
    text: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ApiEmbedding {
    vector: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct ApiList<T> {
    #[serde(default = "Vec::new")]
    data: Vec<T>,
}

#[derive(Debug, Deserialize)]
struct ApiCitation {
    #[serde(default)]
    contexts: Vec<String>,
    #[serde(default)]
    intents: Vec<String>,
    #[serde(rename = "citingPaper")]
    citing_paper: ApiPaper,
}

impl ApiPaper {
    fn into_record(self) -> Option<PaperRecord> {
        Some(PaperRecord {
            paper_id: self.paper_id?,
            title: self.title.unwrap_or_default(),
            year: self.year,
            embedding: self.embedding.and_then(|e| e.vector).map(EmbeddingVector),
            tldr: self.tldr.and_then(|t| t.text),
            url: self.url,
            citation_contexts: vec![],
        })
    }
}

pub(crate) fn parse_paper(body: &str) -> Result<Option<PaperRecord>, MetadataError> {
    let p: ApiPaper = serde_json::from_str(body).map_err(|e| MetadataError::Decode(e.to_string()))?;
    Ok(p.into_record())
}

pub(crate) fn parse_search(body: &str) -> Result<Vec<PaperRecord>, MetadataError> {
    let list: ApiList<ApiPaper> = serde_json::from_str(body).map_err(|e| MetadataError::Decode(e.to_string()))?;
    Ok(list.data.into_iter().filter_map(ApiPaper::into_record).collect())
}

pub(crate) fn parse_citations(cited_id: &str, body: &str) -> Result<Vec<PaperRecord>, MetadataError> {
    let list: ApiList<ApiCitation> = serde_json::from_str(body).map_err(|e| MetadataError::Decode(e.to_string()))?;
    Ok(list
        .data
        .into_iter()
        .filter_map(|c| {
            let intent = (!c.intents.is_empty()).then(|| c.intents.join(", "));
            let mut record = c.citing_paper.into_record()?;
            record.citation_contexts = c
                .contexts
                .into_iter()
                .map(|snippet| CitationSnippet { cited_paper_id: cited_id.to_string(), snippet, intent: intent.clone() })
                .collect();
            Some(record)
        })
        .collect())
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Result<Self, MetadataError> {
        let client = Client::builder()
            .timeout(Duration::from_secs(TIMEOUT_SECS))
            .build()
            .map_err(|e| MetadataError::Network(e.to_string()))?;
        Ok(HttpBackend { base_url: base_url.into().trim_end_matches('/').to_string(), api_key, client })
    }

    fn get(&self, path: &str, query: &[(&str, String)]) -> Result<Option<String>, MetadataError> {
        let mut req = self.client.get(format!("{}{path}", self.base_url)).query(query);
        if let Some(key) = &self.api_key {
            req = req.header("x-api-key", key);
        }
        let resp = req.send().map_err(|e| MetadataError::Network(e.to_string()))?;
        match resp.status() {
            StatusCode::NOT_FOUND => Ok(None),
            StatusCode::TOO_MANY_REQUESTS => Err(MetadataError::RateLimited),
            s if s.is_success() => resp.text().map(Some).map_err(|e| MetadataError::Network(e.to_string())),
            s => Err(MetadataError::Network(format!("HTTP {s}"))),
        }
    }
}

fn encode_id(id: &str) -> String {
    id.chars()
        .map(|c| match c {
            'A'..='Z' | 'a'..='z' | '0'..='9' | '-' | '_' | '.' | ':' => c.to_string(),
            _ => format!("%{:02X}", c as u32),
        })
        .collect()
}

impl MetadataBackend for HttpBackend {
    fn search_title(&self, title: &str, limit: usize) -> Result<Vec<PaperRecord>, MetadataError> {
        let body = self.get(
            "/paper/search",
            &[("query", title.to_string()), ("limit", limit.to_string()), ("fields", PAPER_FIELDS.into())],
        )?;
        body.map_or(Ok(vec![]), |b| parse_search(&b))
    }

    fn paper(&self, paper_id: &str) -> Result<Option<PaperRecord>, MetadataError> {
        match self.get(&format!("/paper/{}", encode_id(paper_id)), &[("fields", PAPER_FIELDS.into())])? {
            Some(body) => parse_paper(&body),
            None => Ok(None),
        }
    }

    fn citations(&self, paper_id: &str, limit: usize) -> Result<Vec<PaperRecord>, MetadataError> {
        let fields = format!(
            "contexts,intents,{}",
            PAPER_FIELDS.split(',').map(|f| format!("citingPaper.{f}")).collect::<Vec<_>>().join(",")
        );
        let body = self
            .get(
                &format!("/paper/{}/citations", encode_id(paper_id)),
                &[("limit", limit.to_string()), ("fields", fields)],
            )?
            .ok_or_else(|| MetadataError::NotFound(paper_id.to_string()))?;
        parse_citations(paper_id, &body)
    }
}
