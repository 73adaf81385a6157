use std::io::Cursor;

use altc_core::corpus::{distribution, export, ingest, read_labeled, CorpusError};
use altc_core::{Document, Format, LabelSchema, LabeledDocument};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corpus_with_counts(counts: &[usize], texts: &[&str]) -> Vec<LabeledDocument> {
    let mut docs = Vec::new();
    for (label, &n) in counts.iter().enumerate() {
        for i in 0..n {
            let text = texts[(label + i) % texts.len()];
            docs.push(LabeledDocument::new(Document::new(format!("{label}-{i}"), text), label));
        }
    }
    docs.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    docs
}

#[test]
fn english_train_counts_survive_ingest() {
    let schema = LabelSchema::hope();
    let docs = corpus_with_counts(
        &[2245, 1284, 540, 472],
        &["I hope, we \"win\" tomorrow!", "nothing, ever", "multi\nline text", ""],
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("en.csv");
    export(std::fs::File::create(&path).unwrap(), Format::Csv, &schema, &docs).unwrap();
    let back = ingest(&path, Format::Csv, &schema).unwrap();
    assert_eq!(distribution(&back.records, &schema).counts, vec![2245, 1284, 540, 472]);
    assert_eq!(back.records, docs);
}

#[test]
fn urdu_counts_survive_ingest() {
    let schema = LabelSchema::hope();
    let docs = corpus_with_counts(
        &[2430, 1107, 331, 745],
        &["امید ہے کہ کل بہتر ہوگا", "کوئی امید نہیں", "اللہ کرے، سب ٹھیک ہو"],
    );
    for format in [Format::Csv, Format::Tsv, Format::Jsonl] {
        let mut buf = Vec::new();
        export(&mut buf, format, &schema, &docs).unwrap();
        let back = read_labeled(Cursor::new(buf), format, &schema).unwrap();
        assert_eq!(distribution(&back.records, &schema).counts, vec![2430, 1107, 331, 745]);
    }
}

#[test]
fn unknown_label_names_the_record() {
    let csv = "id,text,label\na1,fine,Not Hope\nb7,oops,Hopeful\n";
    match read_labeled(Cursor::new(csv), Format::Csv, &LabelSchema::hope()) {
        Err(CorpusError::UnknownLabel { id, .. }) => assert_eq!(id, "b7"),
        other => panic!("unexpected {other:?}"),
    }
}

fn doc_strategy() -> impl Strategy<Value = (String, Option<String>, usize)> {
    (
        "\\PC{0,40}",
        prop::option::of("[a-z]{2}"),
        0usize..4,
    )
}

proptest! {
    #[test]
    fn export_then_ingest_is_identity(
        items in prop::collection::vec(doc_strategy(), 1..30),
        fmt in prop::sample::select(vec![Format::Csv, Format::Tsv, Format::Jsonl]),
    ) {
        let schema = LabelSchema::hope();
        let docs: Vec<LabeledDocument> = items
            .into_iter()
            .enumerate()
            .map(|(i, (text, language, label))| {
                let mut d = Document::new(format!("doc{i}"), text);
                d.language = language;
                LabeledDocument::new(d, label)
            })
            .collect();
        let mut buf = Vec::new();
        export(&mut buf, fmt, &schema, &docs).unwrap();
        let back = read_labeled(Cursor::new(buf), fmt, &schema).unwrap();
        prop_assert_eq!(back.records, docs);
    }

    #[test]
    fn distribution_ignores_order(labels in prop::collection::vec(0usize..4, 0..200), seed in any::<u64>()) {
        let schema = LabelSchema::hope();
        let mut docs: Vec<LabeledDocument> = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| LabeledDocument::new(Document::new(i.to_string(), ""), l))
            .collect();
        let before = distribution(&docs, &schema);
        docs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let after = distribution(&docs, &schema);
        prop_assert_eq!(before.counts.iter().sum::<usize>(), before.total);
        prop_assert_eq!(before, after);
    }
}
