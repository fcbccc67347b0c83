use serde_json::{Map, Value};

use super::{
    resolve_aspect, tokenize, CorpusError, Dataset, DatasetMeta, Ingested, Instance, Polarity,
};

fn field<'a>(entry: &'a Map<String, Value>, names: &[&str]) -> Option<&'a Value> {
    names.iter().find_map(|n| entry.get(*n))
}

fn offset(v: &Value) -> Option<usize> {
    match v {
        Value::Number(n) => n.as_u64().map(|x| x as usize),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Parses an ARTS test file. Both the id-keyed object layout and a plain
/// list of entries are accepted.
pub fn parse_arts(bytes: &[u8], meta: DatasetMeta) -> Result<Ingested, CorpusError> {
    let root: Value = serde_json::from_slice(bytes)?;
    let entries: Vec<(String, &Value)> = match &root {
        Value::Object(map) => map.iter().map(|(k, v)| (k.clone(), v)).collect(),
        Value::Array(list) => list
            .iter()
            .enumerate()
            .map(|(i, v)| (i.to_string(), v))
            .collect(),
        _ => {
            return Err(CorpusError::Structure(
                "ARTS file must be a JSON object or array".into(),
            ))
        }
    };

    let mut instances = Vec::with_capacity(entries.len());
    let mut warnings = Vec::new();
    for (key, value) in entries {
        let Value::Object(entry) = value else {
            return Err(CorpusError::Structure(format!("entry {key} is not an object")));
        };
        let id = match entry.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(v @ Value::Number(_)) => v.to_string(),
            _ => key.clone(),
        };
        let missing = |what: &str| CorpusError::Structure(format!("entry {id} lacks `{what}`"));
        let text = field(entry, &["sentence", "text"])
            .and_then(Value::as_str)
            .ok_or_else(|| missing("sentence"))?;
        let term = field(entry, &["term", "aspect"])
            .and_then(Value::as_str)
            .ok_or_else(|| missing("term"))?;
        let from = entry.get("from").and_then(offset).ok_or_else(|| missing("from"))?;
        let to = entry.get("to").and_then(offset).ok_or_else(|| missing("to"))?;
        let polarity = entry
            .get("polarity")
            .and_then(Value::as_str)
            .ok_or_else(|| missing("polarity"))?;

        let label: Polarity = match polarity.parse() {
            Ok(p) => p,
            Err(_) => {
                warnings.push(format!("{id}: unknown polarity `{polarity}`; entry rejected"));
                continue;
            }
        };
        let tokens = tokenize(text);
        let Some((start, len)) = resolve_aspect(&id, &tokens, term, from, to, &mut warnings) else {
            continue;
        };
        instances.push(Instance::new(id, meta.domain, tokens, start, len, label)?);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Ingested {
        dataset: Dataset::new(meta, instances)?,
        warnings,
    })
}
