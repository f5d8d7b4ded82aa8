use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{
    Attributes, CategoryLabel, Corpus, DeletionLabel, LabelSource, Provenance, TweetRecord, UserStatus,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl CorpusFormat {
    /// Guesses the format from a file extension (`.tsv` or anything else).
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") => CorpusFormat::Tsv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(format!("unknown corpus format {other:?} (expected jsonl or tsv)")),
        }
    }
}

const REQUIRED_COLUMNS: [&str; 11] = [
    "id",
    "text",
    "deletion_label",
    "category_label",
    "label_source",
    "has_hashtag",
    "has_url",
    "has_mention",
    "is_reply",
    "is_retweet",
    "user_status",
];

const OPTIONAL_COLUMNS: [&str; 2] = ["user_id", "target"];

/// Wire shape of one JSONL line.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    id: String,
    text: String,
    deletion_label: DeletionLabel,
    category_label: CategoryLabel,
    label_source: LabelSource,
    has_hashtag: bool,
    has_url: bool,
    has_mention: bool,
    is_reply: bool,
    is_retweet: bool,
    user_status: UserStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    user_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<String>,
}

impl From<Row> for TweetRecord {
    fn from(row: Row) -> Self {
        TweetRecord {
            id: row.id,
            text: row.text,
            deletion_label: row.deletion_label,
            category_label: row.category_label,
            label_source: row.label_source,
            attributes: Attributes {
                has_hashtag: row.has_hashtag,
                has_url: row.has_url,
                has_mention: row.has_mention,
                is_reply: row.is_reply,
                is_retweet: row.is_retweet,
            },
            user_status: row.user_status,
            user_id: row.user_id,
            target: row.target,
        }
    }
}

impl From<&TweetRecord> for Row {
    fn from(r: &TweetRecord) -> Self {
        Row {
            id: r.id.clone(),
            text: r.text.clone(),
            deletion_label: r.deletion_label,
            category_label: r.category_label,
            label_source: r.label_source,
            has_hashtag: r.attributes.has_hashtag,
            has_url: r.attributes.has_url,
            has_mention: r.attributes.has_mention,
            is_reply: r.attributes.is_reply,
            is_retweet: r.attributes.is_retweet,
            user_status: r.user_status,
            user_id: r.user_id.clone(),
            target: r.target.clone(),
        }
    }
}

/// Reads a corpus file. Records keep file order.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let file = File::open(path)?;
    let mut corpus = parse_corpus(BufReader::new(file), format, &path.display().to_string())?;
    corpus.provenance.loaded_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .ok()
        .map(|d| d.as_secs());
    Ok(corpus)
}

/// Parses corpus text from any reader. `source_name` is used in error
/// messages and recorded as provenance.
pub fn parse_corpus<R: BufRead>(reader: R, format: CorpusFormat, source_name: &str) -> Result<Corpus> {
    let records = match format {
        CorpusFormat::Jsonl => parse_jsonl(reader, source_name)?,
        CorpusFormat::Tsv => parse_tsv(reader, source_name)?,
    };
    let mut first_line: HashMap<&str, usize> = HashMap::with_capacity(records.len());
    for (line, record) in &records {
        if first_line.insert(record.id.as_str(), *line).is_some() {
            return Err(Error::DuplicateId {
                id: record.id.clone(),
                line: *line,
            });
        }
    }
    Corpus::new(
        records.into_iter().map(|(_, r)| r).collect(),
        Provenance::named(source_name),
    )
}

fn check_record(record: &TweetRecord, source_name: &str, line: usize) -> Result<()> {
    record.validate().map_err(|e| match e {
        Error::InvalidRecord { reason, .. } => Error::parse(source_name, line, reason),
        other => other,
    })
}

fn parse_jsonl<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<(usize, TweetRecord)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line).map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        let record = TweetRecord::from(row);
        check_record(&record, source_name, line_no)?;
        out.push((line_no, record));
    }
    Ok(out)
}

fn parse_tsv<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<(usize, TweetRecord)>> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(Error::parse(source_name, 1, "missing header row")),
    };
    let columns: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    for col in &columns {
        if !REQUIRED_COLUMNS.contains(col) && !OPTIONAL_COLUMNS.contains(col) {
            return Err(Error::parse(source_name, 1, format!("unknown column {col:?}")));
        }
    }
    let index_of = |name: &str| columns.iter().position(|c| *c == name);
    let mut required = [0usize; 11];
    for (slot, name) in required.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = index_of(name).ok_or_else(|| Error::parse(source_name, 1, format!("missing column {name:?}")))?;
    }
    let user_id_col = index_of("user_id");
    let target_col = index_of("target");

    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != columns.len() {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        let err = |reason: String| Error::parse(source_name, line_no, reason);
        let field = |k: usize| fields[required[k]];
        let boolean = |k: usize| match field(k) {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(err(format!("{}: expected true or false, found {other:?}", REQUIRED_COLUMNS[k]))),
        };
        let optional = |col: Option<usize>| {
            col.map(|c| unescape(fields[c])).filter(|v| !v.is_empty())
        };
        let record = TweetRecord {
            id: unescape(field(0)),
            text: unescape(field(1)),
            deletion_label: field(2).parse().map_err(err)?,
            category_label: field(3).parse().map_err(err)?,
            label_source: field(4).parse().map_err(err)?,
            attributes: Attributes {
                has_hashtag: boolean(5)?,
                has_url: boolean(6)?,
                has_mention: boolean(7)?,
                is_reply: boolean(8)?,
                is_retweet: boolean(9)?,
            },
            user_status: field(10).parse().map_err(err)?,
            user_id: optional(user_id_col),
            target: optional(target_col),
        };
        check_record(&record, source_name, line_no)?;
        out.push((line_no, record));
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Writes a corpus. The optional `user_id` and `target` columns are emitted
/// only when at least one record carries them.
pub fn write_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_corpus_to(corpus, &mut w, format)?;
    w.flush()?;
    Ok(())
}

pub(crate) fn write_corpus_to<W: Write>(corpus: &Corpus, w: &mut W, format: CorpusFormat) -> Result<()> {
    match format {
        CorpusFormat::Jsonl => {
            for r in corpus.iter() {
                serde_json::to_writer(&mut *w, &Row::from(r)).map_err(std::io::Error::from)?;
                w.write_all(b"\n")?;
            }
        }
        CorpusFormat::Tsv => {
            let with_user = corpus.iter().any(|r| r.user_id.is_some());
            let with_target = corpus.iter().any(|r| r.target.is_some());
            let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
            if with_user {
                header.push("user_id");
            }
            if with_target {
                header.push("target");
            }
            writeln!(w, "{}", header.join("\t"))?;
            for r in corpus.iter() {
                let a = &r.attributes;
                let mut fields = vec![
                    escape(&r.id),
                    escape(&r.text),
                    r.deletion_label.to_string(),
                    r.category_label.to_string(),
                    r.label_source.to_string(),
                    a.has_hashtag.to_string(),
                    a.has_url.to_string(),
                    a.has_mention.to_string(),
                    a.is_reply.to_string(),
                    a.is_retweet.to_string(),
                    r.user_status.to_string(),
                ];
                if with_user {
                    fields.push(r.user_id.as_deref().map(escape).unwrap_or_default());
                }
                if with_target {
                    fields.push(r.target.as_deref().map(escape).unwrap_or_default());
                }
                writeln!(w, "{}", fields.join("\t"))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jsonl_line(id: &str, text: &str, cat: &str, src: &str) -> String {
        format!(
            r#"{{"id":"{id}","text":"{text}","deletion_label":"deleted","category_label":"{cat}","label_source":"{src}","has_hashtag":false,"has_url":true,"has_mention":false,"is_reply":false,"is_retweet":true,"user_status":"unknown"}}"#
        )
    }

    fn parse(text: &str, format: CorpusFormat) -> Result<Corpus> {
        parse_corpus(text.as_bytes(), format, "mem")
    }

    #[test]
    fn three_lines_in_order() {
        let text = [
            jsonl_line("t3", "c", "spam", "manual"),
            jsonl_line("t1", "a", "not_disinfo", "manual"),
            jsonl_line("t2", "b", "unlabeled", "none"),
        ]
        .join("\n");
        let corpus = parse(&text, CorpusFormat::Jsonl).unwrap();
        let ids: Vec<_> = corpus.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["t3", "t1", "t2"]);
        assert!(corpus.records()[0].attributes.has_url);
        assert!(corpus.records()[0].attributes.is_retweet);
    }

    #[test]
    fn duplicate_id_names_second_line() {
        let text = [
            jsonl_line("t0", "x", "spam", "manual"),
            jsonl_line("t1", "a", "spam", "manual"),
            jsonl_line("t2", "a", "spam", "manual"),
            jsonl_line("t3", "a", "spam", "manual"),
            jsonl_line("t1", "b", "spam", "manual"),
        ]
        .join("\n");
        let err = parse(&text, CorpusFormat::Jsonl).unwrap_err();
        match err {
            Error::DuplicateId { id, line } => {
                assert_eq!(id, "t1");
                assert_eq!(line, 5);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn weak_hate_speech_is_rejected_with_line() {
        let text = [
            jsonl_line("t1", "a", "spam", "manual"),
            jsonl_line("t2", "a", "hate_speech", "weak"),
        ]
        .join("\n");
        let err = parse(&text, CorpusFormat::Jsonl).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{}\n{{not json", jsonl_line("t1", "a", "spam", "manual"));
        let err = parse(&text, CorpusFormat::Jsonl).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        let missing_key = r#"{"id":"t1","text":"a"}"#;
        assert!(matches!(parse(missing_key, CorpusFormat::Jsonl).unwrap_err(), Error::Parse { line: 1, .. }));
    }

    #[test]
    fn tsv_and_jsonl_agree() {
        let mut r = TweetRecord::new("t\t1", "line one\nline\ttwo \\ done")
            .with_deletion(DeletionLabel::NotDeleted)
            .with_category(CategoryLabel::NotDisinfo, LabelSource::Weak);
        r.user_id = Some("u9".into());
        r.attributes.has_mention = true;
        let plain = TweetRecord::new("t2", "plain");
        let corpus = Corpus::new(vec![r, plain], Provenance::default()).unwrap();

        for format in [CorpusFormat::Tsv, CorpusFormat::Jsonl] {
            let mut buf = Vec::new();
            write_corpus_to(&corpus, &mut buf, format).unwrap();
            let back = parse_corpus(buf.as_slice(), format, "mem").unwrap();
            assert_eq!(back.records(), corpus.records());
        }

        let mut buf = Vec::new();
        write_corpus_to(&corpus, &mut buf, CorpusFormat::Tsv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("unlabeled\tnone"));
    }

    #[test]
    fn tsv_requires_header_columns() {
        let err = parse("id\ttext\n1\ta\n", CorpusFormat::Tsv).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let header = REQUIRED_COLUMNS.join("\t");
        let row = "t1\thi\tdeleted\tspam\tmanual\tfalse\tfalse\tmaybe\tfalse\tfalse\tunknown";
        let err = parse(&format!("{header}\n{row}\n"), CorpusFormat::Tsv).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }
}
