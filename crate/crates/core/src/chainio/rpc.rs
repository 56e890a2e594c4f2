//! Live chain access: JSON-RPC to an archive node for traces, logs and
//! code, and an Etherscan-compatible REST API for verified ABIs.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::transport::{HttpRequest, Method, Transport, TransportError};
use super::{ChainError, ChainSource, FixtureChain, ScanRange};
use crate::model::{Address, CallType, EventLogRecord, TopicHash, TraceRecord};

/// Which trace API the node exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFlavor {
    /// Parity/Erigon `trace_filter` with from/to address filters.
    #[default]
    TraceFilter,
    /// Geth `debug_traceBlockByNumber` with the call tracer, one block at a time.
    DebugTraceBlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RpcConfig {
    pub rpc_url: String,
    #[serde(default)]
    pub trace_flavor: TraceFlavor,
    #[serde(default = "default_explorer")]
    pub explorer_url: String,
    #[serde(default)]
    pub explorer_api_key: Option<String>,
    /// Blocks per `eth_getLogs` / `trace_filter` request.
    #[serde(default = "default_span")]
    pub block_span: u64,
}

fn default_explorer() -> String {
    "https://api.etherscan.io/api".to_owned()
}

fn default_span() -> u64 {
    100_000
}

impl RpcConfig {
    pub fn new(rpc_url: &str) -> Self {
        RpcConfig {
            rpc_url: rpc_url.to_owned(),
            trace_flavor: TraceFlavor::default(),
            explorer_url: default_explorer(),
            explorer_api_key: None,
            block_span: default_span(),
        }
    }
}

pub struct RpcChain<T> {
    config: RpcConfig,
    transport: T,
}

fn hex_u64(n: u64) -> String {
    format!("0x{n:x}")
}

fn parse_u64(v: &Value) -> Result<u64, ChainError> {
    match v {
        Value::Number(n) => n.as_u64().ok_or_else(|| ChainError::Rpc(format!("bad number {n}"))),
        Value::String(s) => {
            let digits = s.strip_prefix("0x").ok_or_else(|| ChainError::Rpc(format!("bad quantity {s}")))?;
            u64::from_str_radix(digits, 16).map_err(|_| ChainError::Rpc(format!("bad quantity {s}")))
        }
        other => Err(ChainError::Rpc(format!("expected quantity, got {other}"))),
    }
}

fn parse_addr(v: &Value) -> Result<Address, ChainError> {
    v.as_str()
        .ok_or_else(|| ChainError::Rpc(format!("expected address, got {v}")))?
        .parse()
        .map_err(|e| ChainError::Rpc(format!("{e}")))
}

fn parse_call_type(s: &str) -> Option<CallType> {
    match s.to_ascii_lowercase().as_str() {
        "call" | "callcode" => Some(CallType::Call),
        "delegatecall" => Some(CallType::DelegateCall),
        "staticcall" => Some(CallType::StaticCall),
        "create" | "create2" => Some(CallType::Create),
        _ => None,
    }
}

impl<T: Transport> RpcChain<T> {
    pub fn new(config: RpcConfig, transport: T) -> Self {
        RpcChain { config, transport }
    }

    pub fn config(&self) -> &RpcConfig {
        &self.config
    }

    fn rpc(&self, method: &str, params: Value) -> Result<Value, ChainError> {
        let body = json!({ "jsonrpc": "2.0", "id": 1, "method": method, "params": params });
        let mut response = self.transport.send(&HttpRequest::post(&self.config.rpc_url, body))?;
        if let Some(err) = response.get("error") {
            return Err(ChainError::Rpc(format!("{method}: {err}")));
        }
        Ok(response.get_mut("result").map(Value::take).unwrap_or(Value::Null))
    }

    fn chunks(&self, range: ScanRange) -> impl Iterator<Item = (u64, u64)> {
        let span = self.config.block_span.max(1);
        let mut next = Some(range.start_block);
        let end = range.end_block;
        std::iter::from_fn(move || {
            let start = next?;
            let stop = start.saturating_add(span - 1).min(end);
            next = if stop >= end { None } else { Some(stop + 1) };
            Some((start, stop))
        })
    }

    fn trace_filter(
        &self,
        filter_key: &str,
        address: Address,
        range: ScanRange,
    ) -> Result<Vec<TraceRecord>, ChainError> {
        let mut out = Vec::new();
        for (from, to) in self.chunks(range) {
            let result = self.rpc(
                "trace_filter",
                json!([{ "fromBlock": hex_u64(from), "toBlock": hex_u64(to), filter_key: [address.to_string()] }]),
            )?;
            for item in result.as_array().into_iter().flatten() {
                if let Some(trace) = parity_trace(item)? {
                    out.push(trace);
                }
            }
        }
        Ok(out)
    }

    fn debug_traces(&self, range: ScanRange) -> Result<Vec<TraceRecord>, ChainError> {
        let mut out = Vec::new();
        for block in range.start_block..=range.end_block {
            let result = self.rpc("debug_traceBlockByNumber", json!([hex_u64(block), { "tracer": "callTracer" }]))?;
            for (tx_index, tx) in result.as_array().into_iter().flatten().enumerate() {
                let frame = tx.get("result").unwrap_or(tx);
                flatten_frame(frame, block, tx_index as u64, &mut Vec::new(), &mut out)?;
            }
        }
        Ok(out)
    }

    fn explorer_abi(&self, address: Address) -> Result<Option<Value>, ChainError> {
        let mut url = format!("{}?module=contract&action=getabi&address={address}", self.config.explorer_url);
        if let Some(key) = &self.config.explorer_api_key {
            url.push_str(&format!("&apikey={key}"));
        }
        let response = self.transport.send(&HttpRequest { method: Method::Get, url: url.clone(), body: None })?;
        let status = response.get("status").and_then(Value::as_str).unwrap_or("0");
        let result = response.get("result").cloned().unwrap_or(Value::Null);
        if status == "1" {
            return Ok(Some(result));
        }
        let text = result.as_str().unwrap_or_default().to_ascii_lowercase();
        if text.contains("not verified") {
            Ok(None)
        } else if text.contains("rate limit") {
            Err(TransportError::RateLimited(url).into())
        } else {
            Err(ChainError::Rpc(format!("explorer error for {address}: {result}")))
        }
    }
}

fn parity_trace(item: &Value) -> Result<Option<TraceRecord>, ChainError> {
    let kind = item.get("type").and_then(Value::as_str).unwrap_or("");
    let action = &item["action"];
    let call_type = match kind {
        "call" => action.get("callType").and_then(Value::as_str).and_then(parse_call_type),
        "create" => Some(CallType::Create),
        _ => None,
    };
    let Some(call_type) = call_type else { return Ok(None) };
    let to = if call_type == CallType::Create {
        match item.pointer("/result/address") {
            Some(v) if !v.is_null() => parse_addr(v)?,
            _ => return Ok(None),
        }
    } else {
        parse_addr(&action["to"])?
    };
    Ok(Some(TraceRecord {
        from: parse_addr(&action["from"])?,
        to,
        call_type,
        block_number: parse_u64(&item["blockNumber"])?,
        tx_index: item.get("transactionPosition").map(parse_u64).transpose()?.unwrap_or(0),
        trace_address: item
            .get("traceAddress")
            .and_then(Value::as_array)
            .map(|a| a.iter().map(parse_u64).collect::<Result<Vec<_>, _>>())
            .transpose()?
            .unwrap_or_default(),
    }))
}

fn flatten_frame(
    frame: &Value,
    block: u64,
    tx_index: u64,
    path: &mut Vec<u64>,
    out: &mut Vec<TraceRecord>,
) -> Result<(), ChainError> {
    if let Some(call_type) = frame.get("type").and_then(Value::as_str).and_then(parse_call_type) {
        if let (Some(from), Some(to)) = (frame.get("from"), frame.get("to")) {
            out.push(TraceRecord {
                from: parse_addr(from)?,
                to: parse_addr(to)?,
                call_type,
                block_number: block,
                tx_index,
                trace_address: path.clone(),
            });
        }
    }
    for (i, child) in frame.get("calls").and_then(Value::as_array).into_iter().flatten().enumerate() {
        path.push(i as u64);
        flatten_frame(child, block, tx_index, path, out)?;
        path.pop();
    }
    Ok(())
}

fn parse_log(item: &Value) -> Result<EventLogRecord, ChainError> {
    let data = item.get("data").and_then(Value::as_str).unwrap_or("0x");
    Ok(EventLogRecord {
        emitter: parse_addr(&item["address"])?,
        topics: item
            .get("topics")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
            .map(|t| t.as_str().unwrap_or_default().parse::<TopicHash>().map_err(|e| ChainError::Rpc(e.to_string())))
            .collect::<Result<_, _>>()?,
        data: hex::decode(data.trim_start_matches("0x")).map_err(|e| ChainError::Rpc(e.to_string()))?,
        block_number: parse_u64(&item["blockNumber"])?,
        tx_index: parse_u64(&item["transactionIndex"])?,
        log_index: parse_u64(&item["logIndex"])?,
    })
}

impl<T: Transport> ChainSource for RpcChain<T> {
    fn calls_to(&self, target: Address, range: ScanRange) -> Result<Vec<TraceRecord>, ChainError> {
        match self.config.trace_flavor {
            TraceFlavor::TraceFilter => self.trace_filter("toAddress", target, range),
            TraceFlavor::DebugTraceBlock => {
                Ok(self.debug_traces(range)?.into_iter().filter(|t| t.to == target).collect())
            }
        }
    }

    fn calls_from(&self, caller: Address, range: ScanRange) -> Result<Vec<TraceRecord>, ChainError> {
        match self.config.trace_flavor {
            TraceFlavor::TraceFilter => self.trace_filter("fromAddress", caller, range),
            TraceFlavor::DebugTraceBlock => {
                Ok(self.debug_traces(range)?.into_iter().filter(|t| t.from == caller).collect())
            }
        }
    }

    fn code_at(&self, address: Address, block: u64) -> Result<Vec<u8>, ChainError> {
        let result = self.rpc("eth_getCode", json!([address.to_string(), hex_u64(block)]))?;
        let text = result.as_str().ok_or_else(|| ChainError::Rpc(format!("eth_getCode returned {result}")))?;
        hex::decode(text.trim_start_matches("0x")).map_err(|e| ChainError::Rpc(e.to_string()))
    }

    fn contract_abi(&self, address: Address) -> Result<Option<Value>, ChainError> {
        self.explorer_abi(address)
    }

    fn logs(
        &self,
        emitter: Address,
        range: ScanRange,
        topic0: Option<TopicHash>,
    ) -> Result<Vec<EventLogRecord>, ChainError> {
        let mut out = Vec::new();
        for (from, to) in self.chunks(range) {
            let mut filter =
                json!({ "address": emitter.to_string(), "fromBlock": hex_u64(from), "toBlock": hex_u64(to) });
            if let Some(t) = topic0 {
                filter["topics"] = json!([t.to_string()]);
            }
            let result = self.rpc("eth_getLogs", json!([filter]))?;
            for item in result.as_array().into_iter().flatten() {
                if item.get("removed").and_then(Value::as_bool) == Some(true) {
                    continue;
                }
                out.push(parse_log(item)?);
            }
        }
        Ok(out)
    }

    fn provenance(&self) -> String {
        format!("explorer:{}", self.config.explorer_url)
    }
}

/// Answers JSON-RPC and explorer requests from a [`FixtureChain`], in the
/// wire shapes real nodes use. Lets the live client run offline.
pub struct FixtureResponder {
    chain: FixtureChain,
}

impl FixtureResponder {
    pub fn new(chain: FixtureChain) -> Self {
        FixtureResponder { chain }
    }

    fn answer_rpc(&self, body: &Value) -> Result<Value, ChainError> {
        let params = &body["params"];
        let range = |f: &Value| -> Result<ScanRange, ChainError> {
            ScanRange::new(parse_u64(&f["fromBlock"])?, parse_u64(&f["toBlock"])?).map_err(ChainError::Rpc)
        };
        let method = body["method"].as_str().unwrap_or_default();
        let result = match method {
            "eth_getCode" => {
                let code = self.chain.code_at(parse_addr(&params[0])?, parse_u64(&params[1])?)?;
                json!(format!("0x{}", hex::encode(code)))
            }
            "eth_getLogs" => {
                let f = &params[0];
                let topic0 = f
                    .pointer("/topics/0")
                    .and_then(Value::as_str)
                    .map(|t| t.parse::<TopicHash>())
                    .transpose()
                    .map_err(|e| ChainError::Rpc(e.to_string()))?;
                let logs = self.chain.logs(parse_addr(&f["address"])?, range(f)?, topic0)?;
                Value::Array(
                    logs.iter()
                        .map(|l| {
                            json!({
                                "address": l.emitter.to_string(),
                                "topics": l.topics.iter().map(ToString::to_string).collect::<Vec<_>>(),
                                "data": format!("0x{}", hex::encode(&l.data)),
                                "blockNumber": hex_u64(l.block_number),
                                "transactionIndex": hex_u64(l.tx_index),
                                "logIndex": hex_u64(l.log_index),
                                "removed": false,
                            })
                        })
                        .collect(),
                )
            }
            "trace_filter" => {
                let f = &params[0];
                let r = range(f)?;
                let traces = if let Some(to) = f.pointer("/toAddress/0") {
                    self.chain.calls_to(parse_addr(to)?, r)?
                } else {
                    self.chain.calls_from(parse_addr(&f["fromAddress"][0])?, r)?
                };
                Value::Array(traces.iter().map(to_parity).collect())
            }
            "debug_traceBlockByNumber" => {
                let block = parse_u64(&params[0])?;
                let traces: Vec<&TraceRecord> =
                    self.chain.traces().iter().filter(|t| t.block_number == block).collect();
                let mut txs: std::collections::BTreeMap<u64, Vec<&TraceRecord>> = Default::default();
                for t in traces {
                    txs.entry(t.tx_index).or_default().push(t);
                }
                // one synthetic root frame per tx holding the recorded calls
                let max_tx = txs.keys().max().copied();
                let frames: Vec<Value> = (0..max_tx.map_or(0, |m| m + 1))
                    .map(|tx| {
                        let calls: Vec<Value> = txs.get(&tx).into_iter().flatten().map(|t| {
                            json!({ "type": format!("{:?}", t.call_type).to_uppercase(), "from": t.from.to_string(), "to": t.to.to_string() })
                        }).collect();
                        json!({ "result": { "type": "ROOT", "calls": calls } })
                    })
                    .collect();
                Value::Array(frames)
            }
            other => return Err(ChainError::Rpc(format!("unsupported method {other}"))),
        };
        Ok(json!({ "jsonrpc": "2.0", "id": body["id"].clone(), "result": result }))
    }

    fn answer_explorer(&self, url: &str) -> Result<Value, ChainError> {
        let address = url
            .split(['?', '&'])
            .find_map(|kv| kv.strip_prefix("address="))
            .ok_or_else(|| ChainError::Rpc(format!("no address in {url}")))?;
        Ok(match self.chain.contract_abi(address.parse().map_err(|e| ChainError::Rpc(format!("{e}")))?)? {
            Some(abi) => json!({ "status": "1", "message": "OK", "result": abi.to_string() }),
            None => json!({ "status": "0", "message": "NOTOK", "result": "Contract source code not verified" }),
        })
    }
}

fn to_parity(t: &TraceRecord) -> Value {
    let (kind, action) = if t.call_type == CallType::Create {
        ("create", json!({ "from": t.from.to_string() }))
    } else {
        let call_type = format!("{:?}", t.call_type).to_lowercase();
        ("call", json!({ "callType": call_type, "from": t.from.to_string(), "to": t.to.to_string() }))
    };
    let mut v = json!({
        "type": kind,
        "action": action,
        "blockNumber": t.block_number,
        "transactionPosition": t.tx_index,
        "traceAddress": t.trace_address,
    });
    if t.call_type == CallType::Create {
        v["result"] = json!({ "address": t.to.to_string() });
    }
    v
}

impl Transport for FixtureResponder {
    fn send(&self, request: &HttpRequest) -> Result<Value, TransportError> {
        let outcome = match (&request.method, &request.body) {
            (Method::Post, Some(body)) => self.answer_rpc(body),
            _ => self.answer_explorer(&request.url),
        };
        outcome.or_else(|e| match e {
            ChainError::Transport(t) => Err(t),
            other => {
                Ok(json!({ "jsonrpc": "2.0", "id": 1, "error": { "code": -32000, "message": other.to_string() } }))
            }
        })
    }
}
