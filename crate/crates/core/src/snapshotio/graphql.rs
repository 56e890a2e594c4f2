//! Live Snapshot hub client over GraphQL, plus an offline responder that
//! answers the same queries from a [`SnapshotFixture`].

use std::collections::BTreeSet;

use serde_json::{json, Value};

use super::{ProposalText, RawVote, SnapshotError, SnapshotFixture, SnapshotSource};
use crate::chainio::{HttpRequest, Transport, TransportError};

pub const DEFAULT_HUB_URL: &str = "https://hub.snapshot.org/graphql";

const SPACES_QUERY: &str = "query Spaces($first: Int!, $skip: Int!, $created_gte: Int!) { spaces(first: $first, skip: $skip, where: {created_gte: $created_gte}, orderBy: \"created\", orderDirection: asc) { id name created followersCount strategies { name params } treasuries { name address network } } }";
const VOTES_QUERY: &str = "query Votes($first: Int!, $skip: Int!, $created_gte: Int!, $space: String!) { votes(first: $first, skip: $skip, where: {space: $space, created_gte: $created_gte}, orderBy: \"created\", orderDirection: asc) { id voter created choice vp space { id } proposal { id } } }";
const PROPOSALS_QUERY: &str = "query Proposals($first: Int!, $skip: Int!, $created_gte: Int!, $space: String!) { proposals(first: $first, skip: $skip, where: {space: $space, created_gte: $created_gte}, orderBy: \"created\", orderDirection: asc) { id title body created space { id } } }";

pub struct GraphqlSnapshot<T> {
    url: String,
    transport: T,
    page_size: u64,
}

impl<T: Transport> GraphqlSnapshot<T> {
    pub fn new(url: &str, transport: T) -> Self {
        GraphqlSnapshot { url: url.to_owned(), transport, page_size: 1000 }
    }

    pub fn with_page_size(mut self, page_size: u64) -> Self {
        self.page_size = page_size.max(1);
        self
    }

    fn query(&self, operation: &str, query: &str, variables: Value) -> Result<Vec<Value>, SnapshotError> {
        let body = json!({ "operationName": operation, "query": query, "variables": variables });
        let response = self.transport.send(&HttpRequest::post(&self.url, body))?;
        if let Some(errors) = response.get("errors") {
            let text = errors.to_string();
            if text.to_ascii_lowercase().contains("rate limit") {
                return Err(TransportError::RateLimited(self.url.clone()).into());
            }
            return Err(SnapshotError::Unavailable(text));
        }
        let field = operation.to_ascii_lowercase();
        match response.pointer(&format!("/data/{field}")) {
            Some(Value::Array(items)) => Ok(items.clone()),
            _ => Err(SnapshotError::Malformed(format!("no data.{field} in response"))),
        }
    }

    /// Walks a `created`-ordered collection with a `created_gte` cursor.
    /// Items already seen at the cursor timestamp are passed over with
    /// `skip`, so runs of equal timestamps longer than a page are not lost.
    fn paginate(&self, operation: &str, query: &str, extra: Value) -> Result<Vec<Value>, SnapshotError> {
        let mut seen = BTreeSet::new();
        let mut out: Vec<Value> = Vec::new();
        let mut cursor = 0u64;
        let mut skip = 0u64;
        loop {
            let mut vars = json!({ "first": self.page_size, "skip": skip, "created_gte": cursor });
            if let (Value::Object(v), Value::Object(e)) = (&mut vars, &extra) {
                v.extend(e.clone());
            }
            let page = self.query(operation, query, vars)?;
            let full = page.len() as u64 >= self.page_size;
            for item in page {
                let id = item["id"].as_str().unwrap_or_default().to_owned();
                if seen.insert(id) {
                    out.push(item);
                }
            }
            if !full {
                return Ok(out);
            }
            let created = |v: &Value| v["created"].as_u64().unwrap_or(0);
            cursor = out.iter().map(created).max().unwrap_or(0);
            skip = out.iter().filter(|v| created(v) == cursor).count() as u64;
        }
    }
}

fn nested_id(v: &Value, key: &str) -> Option<String> {
    match &v[key] {
        Value::String(s) => Some(s.clone()),
        other => other["id"].as_str().map(str::to_owned),
    }
}

impl<T: Transport> SnapshotSource for GraphqlSnapshot<T> {
    fn spaces(&self) -> Result<Vec<Value>, SnapshotError> {
        self.paginate("Spaces", SPACES_QUERY, json!({}))
    }

    fn votes(&self, space_id: &str) -> Result<Vec<RawVote>, SnapshotError> {
        self.paginate("Votes", VOTES_QUERY, json!({ "space": space_id }))?
            .into_iter()
            .map(|v| {
                let bad = || SnapshotError::Malformed(format!("vote {v}"));
                Ok(RawVote {
                    id: v["id"].as_str().ok_or_else(bad)?.to_owned(),
                    space: nested_id(&v, "space").unwrap_or_else(|| space_id.to_owned()),
                    proposal: nested_id(&v, "proposal").ok_or_else(bad)?,
                    voter: v["voter"].as_str().and_then(|s| s.parse().ok()).ok_or_else(bad)?,
                    choice: v["choice"].clone(),
                    vp: v["vp"].as_f64().unwrap_or(0.0),
                    created: v["created"].as_u64().ok_or_else(bad)?,
                })
            })
            .collect()
    }

    fn proposals(&self, space_id: &str) -> Result<Vec<ProposalText>, SnapshotError> {
        self.paginate("Proposals", PROPOSALS_QUERY, json!({ "space": space_id }))?
            .into_iter()
            .map(|p| {
                Ok(ProposalText {
                    id: p["id"].as_str().ok_or_else(|| SnapshotError::Malformed(format!("proposal {p}")))?.to_owned(),
                    space: nested_id(&p, "space").unwrap_or_else(|| space_id.to_owned()),
                    title: p["title"].as_str().unwrap_or_default().to_owned(),
                    body: p["body"].as_str().unwrap_or_default().to_owned(),
                    created: p["created"].as_u64().unwrap_or(0),
                })
            })
            .collect()
    }
}

/// Serves the client's queries from fixture data in the hub's wire shape.
pub struct SnapshotResponder {
    fixture: SnapshotFixture,
}

impl SnapshotResponder {
    pub fn new(fixture: SnapshotFixture) -> Self {
        SnapshotResponder { fixture }
    }

    fn page(mut items: Vec<Value>, vars: &Value) -> Vec<Value> {
        let from = vars["created_gte"].as_u64().unwrap_or(0);
        let first = vars["first"].as_u64().unwrap_or(1000) as usize;
        let skip = vars["skip"].as_u64().unwrap_or(0) as usize;
        items.retain(|v| v["created"].as_u64().unwrap_or(0) >= from);
        items.sort_by(|a, b| {
            (a["created"].as_u64().unwrap_or(0), a["id"].as_str())
                .cmp(&(b["created"].as_u64().unwrap_or(0), b["id"].as_str()))
        });
        items.into_iter().skip(skip).take(first).collect()
    }
}

impl Transport for SnapshotResponder {
    fn send(&self, request: &HttpRequest) -> Result<Value, TransportError> {
        let body = request.body.clone().unwrap_or(Value::Null);
        let vars = &body["variables"];
        let space = vars["space"].as_str().unwrap_or_default();
        let (field, items): (&str, Vec<Value>) = match body["operationName"].as_str() {
            Some("Spaces") => ("spaces", self.fixture.spaces.clone()),
            Some("Votes") => (
                "votes",
                self.fixture
                    .votes
                    .iter()
                    .filter(|v| v.space == space)
                    .map(|v| {
                        json!({
                            "id": v.id, "voter": v.voter.to_string(), "created": v.created, "choice": v.choice,
                            "vp": v.vp, "space": { "id": v.space }, "proposal": { "id": v.proposal },
                        })
                    })
                    .collect(),
            ),
            Some("Proposals") => (
                "proposals",
                self.fixture
                    .proposals
                    .iter()
                    .filter(|p| p.space == space)
                    .map(|p| json!({ "id": p.id, "title": p.title, "body": p.body, "created": p.created, "space": { "id": p.space } }))
                    .collect(),
            ),
            other => return Ok(json!({ "errors": [{ "message": format!("unknown operation {other:?}") }] })),
        };
        Ok(json!({ "data": { field: Self::page(items, vars) } }))
    }
}
