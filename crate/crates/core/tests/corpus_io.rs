use std::fs;

use ideation_core::corpus::{load_posts, save_posts, Format};
use ideation_core::{Error, Post, RiskLabel};
use proptest::prelude::*;
use tempfile::TempDir;

const HEADER: &str = "post_id,user_id,timestamp,subreddit,post_title,post_body\n";

fn write(dir: &TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn csv_header_only_is_empty() {
    let dir = TempDir::new().unwrap();
    let loaded = load_posts(&write(&dir, "p.csv", HEADER), Format::Csv).unwrap();
    assert!(loaded.posts.is_empty());
    assert!(loaded.errors.is_empty());
}

#[test]
fn csv_row_maps_fields() {
    let dir = TempDir::new().unwrap();
    let text = format!("{HEADER}p1,u1,1420070400,SuicideWatch,\"help\",\"I feel lost\"\n");
    let loaded = load_posts(&write(&dir, "p.csv", &text), Format::Csv).unwrap();
    assert_eq!(
        loaded.posts,
        [Post {
            post_id: "p1".into(),
            user_id: "u1".into(),
            timestamp: 1_420_070_400,
            subreddit: "SuicideWatch".into(),
            title: "help".into(),
            body: "I feel lost".into(),
            label: None,
        }]
    );
}

#[test]
fn jsonl_missing_key_is_a_record_error() {
    let dir = TempDir::new().unwrap();
    let text = concat!(
        r#"{"post_id":"a","user_id":"u","timestamp":1,"subreddit":"s","post_title":"t","post_body":"b"}"#,
        "\n",
        r#"{"post_id":"b","user_id":"u","timestamp":2,"subreddit":"s","post_title":"t"}"#,
        "\n",
        r#"{"post_id":"c","user_id":"u","timestamp":3,"subreddit":"s","post_title":"","post_body":"x"}"#,
        "\n",
    );
    let loaded = load_posts(&write(&dir, "p.jsonl", text), Format::Jsonl).unwrap();
    assert_eq!(loaded.posts.len(), 2);
    assert_eq!(loaded.errors.len(), 1);
    assert_eq!(loaded.errors[0].line, 2);
    assert!(
        loaded.errors[0].message.contains("post_body"),
        "{}",
        loaded.errors[0].message
    );
}

#[test]
fn bad_records_cite_their_lines() {
    let dir = TempDir::new().unwrap();
    let text = format!("{HEADER}p1,u1,soon,s,t,b\np2,u1,5,s,,\np3,u1,6,s,t,b\np3,u2,7,s,t,c\n");
    let loaded = load_posts(&write(&dir, "p.csv", &text), Format::Csv).unwrap();
    assert_eq!(loaded.posts.len(), 1);
    let lines: Vec<usize> = loaded.errors.iter().map(|e| e.line).collect();
    assert_eq!(lines, [2, 3, 5]);
    assert!(
        loaded.errors[2].message.contains("line 4"),
        "{}",
        loaded.errors[2].message
    );
}

#[test]
fn missing_column_and_file() {
    let dir = TempDir::new().unwrap();
    let path = write(
        &dir,
        "p.csv",
        "post_id,user_id,timestamp,subreddit,post_title\n",
    );
    match load_posts(&path, Format::Csv) {
        Err(Error::MissingColumn { column, .. }) => assert_eq!(column, "post_body"),
        other => panic!("{other:?}"),
    }
    let missing = dir.path().join("absent.csv");
    assert!(matches!(
        load_posts(&missing, Format::Csv),
        Err(Error::Io { .. })
    ));
}

#[test]
fn label_column_is_optional_and_checked() {
    let dir = TempDir::new().unwrap();
    let text = "post_id,user_id,timestamp,subreddit,post_title,post_body,label\np1,u,0,s,t,b,3\np2,u,0,s,t,b,7\n";
    let loaded = load_posts(&write(&dir, "p.csv", text), Format::Csv).unwrap();
    assert_eq!(loaded.posts[0].label, Some(RiskLabel::SevereRisk));
    assert_eq!(loaded.errors.len(), 1);
    assert_eq!(loaded.errors[0].line, 3);
}

fn post_strategy() -> impl Strategy<Value = Post> {
    let text = "[ -~\n\"é]{0,12}";
    (
        text,
        text,
        any::<i64>(),
        "[a-z]{1,6}",
        proptest::option::of(0u8..4),
    )
        .prop_map(|(title, body, timestamp, sub, label)| Post {
            post_id: String::new(),
            user_id: "user,1".into(),
            timestamp,
            subreddit: sub,
            title: if title.is_empty() && body.is_empty() {
                "x".into()
            } else {
                title
            },
            body,
            label: label.and_then(RiskLabel::from_code),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn save_load_round_trip(mut posts in proptest::collection::vec(post_strategy(), 0..8)) {
        for (i, p) in posts.iter_mut().enumerate() {
            p.post_id = format!("p{i}");
        }
        // A file either has a label column or not.
        let labeled = posts.iter().any(|p| p.label.is_some());
        for p in posts.iter_mut() {
            if labeled && p.label.is_none() {
                p.label = Some(RiskLabel::NoRisk);
            }
        }
        let dir = TempDir::new().unwrap();
        for (name, format) in [("p.csv", Format::Csv), ("p.jsonl", Format::Jsonl)] {
            let path = dir.path().join(name);
            save_posts(&path, &posts, format).unwrap();
            let loaded = load_posts(&path, format).unwrap();
            prop_assert!(loaded.errors.is_empty(), "{:?}", loaded.errors);
            prop_assert_eq!(&loaded.posts, &posts);
        }
    }
}
