use super::{
    resolve_aspect, tokenize, CorpusError, Dataset, DatasetMeta, Ingested, Instance, Polarity,
};

/// Parses a SemEval-2014 aspect-term file into one instance per
/// `(sentence, aspectTerm)` pair. Aspect terms labelled `conflict` are
/// dropped; sentences without aspect terms contribute nothing.
pub fn parse_semeval_xml(bytes: &[u8], meta: DatasetMeta) -> Result<Ingested, CorpusError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| CorpusError::Structure(format!("file is not UTF-8: {e}")))?;
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        CorpusError::Xml {
            line: pos.row,
            col: pos.col,
            msg: e.to_string(),
        }
    })?;

    let mut instances = Vec::new();
    let mut warnings = Vec::new();
    for sentence in doc.descendants().filter(|n| n.has_tag_name("sentence")) {
        let sid = sentence.attribute("id").unwrap_or("?");
        let Some(text_node) = sentence.children().find(|n| n.has_tag_name("text")) else {
            warnings.push(format!("sentence {sid} has no <text>; skipped"));
            continue;
        };
        let sentence_text = text_node.text().unwrap_or("");
        let tokens = tokenize(sentence_text);

        let terms = sentence
            .children()
            .filter(|n| n.has_tag_name("aspectTerms"))
            .flat_map(|n| n.children().filter(|c| c.has_tag_name("aspectTerm")));
        for (k, term) in terms.enumerate() {
            let id = format!("{sid}:{k}");
            let polarity = term.attribute("polarity").unwrap_or("");
            if polarity.eq_ignore_ascii_case("conflict") {
                continue;
            }
            let label: Polarity = match polarity.parse() {
                Ok(p) => p,
                Err(_) => {
                    warnings.push(format!("{id}: unknown polarity `{polarity}`; skipped"));
                    continue;
                }
            };
            let surface = term.attribute("term").unwrap_or("");
            let offsets = (
                term.attribute("from").and_then(|v| v.trim().parse::<usize>().ok()),
                term.attribute("to").and_then(|v| v.trim().parse::<usize>().ok()),
            );
            let (Some(from), Some(to)) = offsets else {
                warnings.push(format!("{id}: missing or invalid from/to; skipped"));
                continue;
            };
            let Some((start, len)) = resolve_aspect(&id, &tokens, surface, from, to, &mut warnings)
            else {
                continue;
            };
            instances.push(Instance::new(
                id,
                meta.domain,
                tokens.clone(),
                start,
                len,
                label,
            )?);
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Ingested {
        dataset: Dataset::new(meta, instances)?,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Domain, Split};

    const META: DatasetMeta = DatasetMeta {
        domain: Domain::Restaurant,
        split: Split::Test,
    };

    #[test]
    fn one_sentence_offsets() {
        let xml = r#"<?xml version="1.0" encoding="UTF-8"?>
<sentences>
  <sentence id="42">
    <text>Great food but the service was bad!</text>
    <aspectTerms>
      <aspectTerm term="food" polarity="positive" from="6" to="10"/>
      <aspectTerm term="service" polarity="negative" from="19" to="26"/>
    </aspectTerms>
  </sentence>
  <sentence id="43"><text>No aspects here.</text></sentence>
</sentences>"#;
        let out = parse_semeval_xml(xml.as_bytes(), META).unwrap();
        let ds = out.dataset;
        assert_eq!(ds.len(), 2);
        let service = &ds.instances[1];
        assert_eq!((service.aspect_start, service.aspect_len), (4, 1));
        assert_eq!(service.label, Polarity::Negative);
        assert_eq!(service.len(), 8);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn conflict_is_dropped_and_entities_decoded() {
        let xml = r#"<sentences><sentence id="1"><text>The &quot;pad thai&quot; was ok</text>
<aspectTerms>
<aspectTerm term="pad thai" polarity="conflict" from="5" to="13"/>
<aspectTerm term="pad thai" polarity="neutral" from="5" to="13"/>
</aspectTerms></sentence></sentences>"#;
        let ds = parse_semeval_xml(xml.as_bytes(), META).unwrap().dataset;
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.instances[0].aspect_surfaces(), ["pad", "thai"]);
    }

    #[test]
    fn misaligned_offsets_are_snapped_with_warning() {
        let xml = r#"<sentences><sentence id="1"><text>Loved the sushi rolls</text>
<aspectTerms><aspectTerm term="sushi" polarity="positive" from="11" to="15"/></aspectTerms>
</sentence></sentences>"#;
        let out = parse_semeval_xml(xml.as_bytes(), META).unwrap();
        assert_eq!(out.dataset.instances[0].aspect_start, 2);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn malformed_xml_reports_line() {
        let xml = "<sentences>\n<sentence id=\"1\">\n<text>oops</sentence>";
        match parse_semeval_xml(xml.as_bytes(), META) {
            Err(CorpusError::Xml { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected XML error, got {other:?}"),
        }
    }
}
