use std::collections::HashMap;

use serde_json::Value as Json;

use super::{Leaf, LeafType, TableError, Value};

const MAGIC: &[u8; 6] = b"MXSEG1";
const NULL_CODE: u32 = u32::MAX;

/// One leaf column stored column-wise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    /// Plain values with a validity mask; invalid slots hold 0.
    Int { values: Vec<i64>, valid: Vec<bool> },
    /// Dictionary-encoded text. Codes index `dict`; `u32::MAX` is null.
    Text { dict: Vec<String>, codes: Vec<u32> },
}

impl Segment {
    pub fn len(&self) -> usize {
        match self {
            Segment::Int { values, .. } => values.len(),
            Segment::Text { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn leaf_type(&self) -> LeafType {
        match self {
            Segment::Int { .. } => LeafType::Int64,
            Segment::Text { .. } => LeafType::Text,
        }
    }

    pub fn value(&self, row: usize) -> Value {
        match self {
            Segment::Int { values, valid } => {
                if valid[row] {
                    Value::Int(values[row])
                } else {
                    Value::Null
                }
            }
            Segment::Text { dict, codes } => match codes[row] {
                NULL_CODE => Value::Null,
                c => Value::Text(dict[c as usize].clone()),
            },
        }
    }

    pub(crate) fn int(&self, row: usize) -> Option<i64> {
        match self {
            Segment::Int { values, valid } => valid[row].then(|| values[row]),
            Segment::Text { .. } => None,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.len() * 9);
        out.extend_from_slice(MAGIC);
        match self {
            Segment::Int { values, valid } => {
                out.push(0);
                out.extend_from_slice(&(values.len() as u64).to_le_bytes());
                for v in values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend(valid.iter().map(|b| u8::from(*b)));
            }
            Segment::Text { dict, codes } => {
                out.push(1);
                out.extend_from_slice(&(codes.len() as u64).to_le_bytes());
                out.extend_from_slice(&(dict.len() as u32).to_le_bytes());
                for s in dict {
                    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
                    out.extend_from_slice(s.as_bytes());
                }
                for c in codes {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn decode(path: &str, bytes: &[u8]) -> Result<Segment, TableError> {
        let corrupt = |reason: &str| TableError::CorruptSegment { path: path.to_string(), reason: reason.to_string() };
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len()).ok_or_else(|| corrupt("truncated header"))? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let kind = r.take(1).ok_or_else(|| corrupt("truncated header"))?[0];
        let rows = r.u64().ok_or_else(|| corrupt("truncated header"))? as usize;
        let seg = match kind {
            0 => {
                let values = (0..rows)
                    .map(|_| r.i64())
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| corrupt("truncated values"))?;
                let valid = r.take(rows).ok_or_else(|| corrupt("truncated validity"))?.iter().map(|b| *b != 0).collect();
                Segment::Int { values, valid }
            }
            1 => {
                let n = r.u32().ok_or_else(|| corrupt("truncated dictionary"))? as usize;
                let mut dict = Vec::with_capacity(n);
                for _ in 0..n {
                    let len = r.u32().ok_or_else(|| corrupt("truncated dictionary"))? as usize;
                    let raw = r.take(len).ok_or_else(|| corrupt("truncated dictionary"))?;
                    dict.push(String::from_utf8(raw.to_vec()).map_err(|_| corrupt("dictionary is not UTF-8"))?);
                }
                let codes = (0..rows)
                    .map(|_| r.u32())
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| corrupt("truncated codes"))?;
                if codes.iter().any(|c| *c != NULL_CODE && *c as usize >= dict.len()) {
                    return Err(corrupt("code out of range"));
                }
                Segment::Text { dict, codes }
            }
            _ => return Err(corrupt("unknown column kind")),
        };
        if r.pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(seg)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }

    fn i64(&mut self) -> Option<i64> {
        Some(i64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

/// Accumulates one column while a source is parsed.
pub(crate) enum Builder {
    Int { values: Vec<i64>, valid: Vec<bool> },
    Text { dict: Vec<String>, index: HashMap<String, u32>, codes: Vec<u32> },
}

impl Builder {
    pub(crate) fn new(ty: LeafType) -> Self {
        match ty {
            LeafType::Int64 => Builder::Int { values: Vec::new(), valid: Vec::new() },
            LeafType::Text => Builder::Text { dict: Vec::new(), index: HashMap::new(), codes: Vec::new() },
        }
    }

    pub(crate) fn push_int(&mut self, v: Option<i64>) {
        if let Builder::Int { values, valid } = self {
            values.push(v.unwrap_or(0));
            valid.push(v.is_some());
        }
    }

    pub(crate) fn push_text(&mut self, v: Option<&str>) {
        if let Builder::Text { dict, index, codes } = self {
            let code = match v {
                None => NULL_CODE,
                Some(s) => match index.get(s) {
                    Some(c) => *c,
                    None => {
                        let c = dict.len() as u32;
                        dict.push(s.to_string());
                        index.insert(s.to_string(), c);
                        c
                    }
                },
            };
            codes.push(code);
        }
    }

    pub(crate) fn finish(self) -> Segment {
        match self {
            Builder::Int { values, valid } => Segment::Int { values, valid },
            Builder::Text { dict, codes, .. } => Segment::Text { dict, codes },
        }
    }
}

fn lookup<'a>(obj: &'a Json, path: &str) -> Option<&'a Json> {
    let mut cur = obj;
    for part in path.split('.') {
        let map = cur.as_object()?;
        cur = match map.get(part) {
            Some(v) => v,
            None => map.iter().find(|(k, _)| k.eq_ignore_ascii_case(part)).map(|(_, v)| v)?,
        };
    }
    Some(cur)
}

fn json_int(v: &Json) -> Option<i64> {
    match v {
        Json::Number(n) => n.as_i64().or_else(|| {
            let f = n.as_f64()?;
            (f.fract() == 0.0 && f >= i64::MIN as f64 && f <= i64::MAX as f64).then_some(f as i64)
        }),
        Json::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn json_text(v: &Json) -> Option<String> {
    match v {
        Json::Null => None,
        Json::String(s) => Some(s.clone()),
        other => Some(other.to_string()),
    }
}

/// Parses JSON Lines into one segment per leaf. Absent fields and values
/// that do not fit the leaf type read as null; blank lines are skipped.
pub(crate) fn parse_jsonl(source: &str, text: &str, leaves: &[Leaf]) -> Result<Vec<Segment>, TableError> {
    let mut builders: Vec<Builder> = leaves.iter().map(|l| Builder::new(l.ty)).collect();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: Json = serde_json::from_str(line).map_err(|e| TableError::Malformed {
            path: source.to_string(),
            line: n + 1,
            reason: e.to_string(),
        })?;
        if !record.is_object() {
            return Err(TableError::Malformed {
                path: source.to_string(),
                line: n + 1,
                reason: "record is not a JSON object".into(),
            });
        }
        for (leaf, b) in leaves.iter().zip(builders.iter_mut()) {
            let v = lookup(&record, &leaf.path);
            match leaf.ty {
                LeafType::Int64 => b.push_int(v.and_then(json_int)),
                LeafType::Text => b.push_text(v.and_then(json_text).as_deref()),
            }
        }
    }
    Ok(builders.into_iter().map(Builder::finish).collect())
}

/// Parses CSV with a header row. Columns are matched by full dotted path or
/// by their last path segment; a missing column reads as null.
pub(crate) fn parse_csv(source: &str, text: &str, leaves: &[Leaf]) -> Result<Vec<Segment>, TableError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let malformed = |line: usize, reason: String| TableError::Malformed { path: source.to_string(), line, reason };
    let headers = reader.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    let positions: Vec<Option<usize>> = leaves
        .iter()
        .map(|leaf| {
            let last = leaf.path.rsplit('.').next().unwrap_or(&leaf.path);
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(&leaf.path))
                .or_else(|| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(last)))
        })
        .collect();
    let mut builders: Vec<Builder> = leaves.iter().map(|l| Builder::new(l.ty)).collect();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| malformed(n + 2, e.to_string()))?;
        for ((leaf, pos), b) in leaves.iter().zip(&positions).zip(builders.iter_mut()) {
            let field = pos.and_then(|p| record.get(p));
            match leaf.ty {
                LeafType::Int64 => b.push_int(field.and_then(|f| f.trim().parse().ok())),
                LeafType::Text => b.push_text(field),
            }
        }
    }
    Ok(builders.into_iter().map(Builder::finish).collect())
}
