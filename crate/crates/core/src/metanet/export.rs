//! Deterministic GraphML, DOT and JSON renderings of a network.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DelegationFunnel, MetagovEdge, MetagovNetwork, NetworkError, Provenance};
use crate::model::{DaoIdentity, DaoSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    GraphMl,
    Dot,
    Json,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "graphml" => Ok(ExportFormat::GraphMl),
            "dot" => Ok(ExportFormat::Dot),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!("unknown format {other:?}; expected graphml, dot or json")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
struct SankeyLink {
    source: usize,
    target: usize,
    value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
struct Sankey {
    nodes: Vec<&'static str>,
    links: Vec<SankeyLink>,
}

fn sankey(f: &DelegationFunnel) -> Sankey {
    let nodes = vec![
        "contract delegations",
        "self-delegation",
        "other delegations",
        "distinct DAO-to-DAO",
        "same DAO or unmapped",
        "active delegates",
        "inactive delegates",
        "new edges",
        "already present",
    ];
    let link = |source, target, value| SankeyLink { source, target, value };
    let links = vec![
        link(0, 1, f.self_delegations),
        link(0, 2, f.non_self()),
        link(2, 3, f.distinct_dao_pairs),
        link(2, 4, f.non_self() - f.distinct_dao_pairs),
        link(3, 5, f.active),
        link(3, 6, f.distinct_dao_pairs - f.active),
        link(5, 7, f.new_edges),
        link(5, 8, f.active - f.new_edges),
    ];
    Sankey { nodes, links }
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    provenance: Provenance,
    vertices: Vec<DaoIdentity>,
    edges: Vec<MetagovEdge>,
    scanned: Vec<String>,
    leaves: Vec<String>,
    funnel: Option<DelegationFunnel>,
    #[serde(default, skip_deserializing, skip_serializing_if = "Option::is_none")]
    sankey: Option<Sankey>,
}

fn to_json(net: &MetagovNetwork) -> String {
    let funnel = net.funnel.clone().filter(DelegationFunnel::is_monotone);
    let doc = NetworkDoc {
        provenance: net.provenance.clone(),
        vertices: net.vertices().cloned().collect(),
        edges: net.edges().cloned().collect(),
        scanned: net.scanned.iter().cloned().collect(),
        leaves: net.leaves.iter().cloned().collect(),
        sankey: funnel.as_ref().map(sankey),
        funnel: net.funnel.clone(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("network serializes");
    text.push('\n');
    text
}

/// Reads a JSON export back.
pub fn parse_json(text: &str) -> Result<MetagovNetwork, NetworkError> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| NetworkError::Malformed(e.to_string()))?;
    MetagovNetwork::from_parts(
        doc.vertices,
        doc.edges,
        doc.provenance,
        doc.scanned.into_iter().collect(),
        doc.leaves.into_iter().collect(),
        doc.funnel,
    )
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn origin(source: DaoSource) -> &'static str {
    match source {
        DaoSource::SeedList => "seed",
        DaoSource::Expansion => "expansion",
        DaoSource::LabelInference => "label",
    }
}

fn to_graphml(net: &MetagovNetwork) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    s.push_str("  <key id=\"name\" for=\"node\" attr.name=\"name\" attr.type=\"string\"/>\n");
    s.push_str("  <key id=\"origin\" for=\"node\" attr.name=\"origin\" attr.type=\"string\"/>\n");
    s.push_str("  <key id=\"kind\" for=\"edge\" attr.name=\"kind\" attr.type=\"string\"/>\n");
    s.push_str("  <key id=\"evidence\" for=\"edge\" attr.name=\"evidence\" attr.type=\"int\"/>\n");
    s.push_str("  <key id=\"first_seen\" for=\"edge\" attr.name=\"first_seen\" attr.type=\"long\"/>\n");
    s.push_str("  <graph id=\"metagovernance\" edgedefault=\"directed\">\n");
    for v in net.vertices() {
        let _ = writeln!(
            s,
            "    <node id=\"{}\"><data key=\"name\">{}</data><data key=\"origin\">{}</data></node>",
            xml_escape(&v.id),
            xml_escape(&v.display_name),
            origin(v.source)
        );
    }
    for (i, e) in net.edges().enumerate() {
        let _ = writeln!(
            s,
            "    <edge id=\"e{i}\" source=\"{}\" target=\"{}\"><data key=\"kind\">{:?}</data><data key=\"evidence\">{}</data><data key=\"first_seen\">{}</data></edge>",
            xml_escape(&e.source),
            xml_escape(&e.target),
            e.kind,
            e.evidence.len(),
            e.first_seen
        );
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

fn to_dot(net: &MetagovNetwork) -> String {
    let mut s = String::from("digraph metagovernance {\n");
    for v in net.vertices() {
        let _ = writeln!(s, "  \"{}\" [label=\"{}\"];", dot_escape(&v.id), dot_escape(&v.display_name));
    }
    for e in net.edges() {
        let _ = writeln!(
            s,
            "  \"{}\" -> \"{}\" [kind=\"{:?}\", evidence={}];",
            dot_escape(&e.source),
            dot_escape(&e.target),
            e.kind,
            e.evidence.len()
        );
    }
    s.push_str("}\n");
    s
}

pub fn export(net: &MetagovNetwork, format: ExportFormat) -> String {
    match format {
        ExportFormat::GraphMl => to_graphml(net),
        ExportFormat::Dot => to_dot(net),
        ExportFormat::Json => to_json(net),
    }
}
