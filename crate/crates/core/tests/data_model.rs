mod common;

use std::collections::HashSet;
use std::path::Path;

use lexalign::data::{load_system, subsample, validate, write_system, LexicalSystem, Modality, Severity, WordEntry, WordType};
use lexalign::rng::SplitMix64;
use lexalign::Error;
use proptest::prelude::*;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const MANIFEST: &str = r#"{"name": "toy", "dim_visual": 2, "dim_linguistic": 3, "words": [
  {"word": "dog", "type": "noun", "n_visual": 1, "n_linguistic": 1},
  {"word": "run", "type": "verb", "n_visual": 1, "n_linguistic": 1}]}"#;

#[test]
fn minimal_valid_system_loads() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "manifest.json", MANIFEST);
    // Records deliberately out of order.
    let e = write(
        dir.path(),
        "embeddings.jsonl",
        r#"{"word": "run", "modality": "linguistic", "index": 0, "vector": [0.5, 0.25, 1]}
{"word": "dog", "modality": "visual", "index": 0, "vector": [1, 2]}
{"word": "dog", "modality": "linguistic", "index": 0, "vector": [3, 4, 5]}
{"word": "run", "modality": "visual", "index": 0, "vector": [-1, 0.1]}
"#,
    );
    let s = load_system(&m, &e).unwrap();
    assert_eq!(s.n_words(), 2);
    assert_eq!(s.words[0].word, "dog");
    assert_eq!(s.words[1].word_type, WordType::Verb);
    assert_eq!(s.words[1].visual_exemplars[0], vec![-1.0, 0.1]);
    assert!(validate(&s).ok);
}

#[test]
fn wrong_length_names_word_and_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "manifest.json", MANIFEST);
    let e = write(
        dir.path(),
        "embeddings.jsonl",
        r#"{"word": "dog", "modality": "visual", "index": 0, "vector": [1, 2]}
{"word": "run", "modality": "visual", "index": 0, "vector": [1, 2, 3]}
"#,
    );
    let err = load_system(&m, &e).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::Record { line: 2, .. }), "{msg}");
    assert!(msg.contains("'run'") && msg.contains("length 3") && msg.contains("expected 2"), "{msg}");
}

#[test]
fn unknown_word_and_duplicates_are_reported_with_lines() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "manifest.json", MANIFEST);
    let e = write(
        dir.path(),
        "unknown.jsonl",
        r#"{"word": "dog", "modality": "visual", "index": 0, "vector": [1, 2]}

{"word": "cat", "modality": "visual", "index": 0, "vector": [1, 2]}
"#,
    );
    match load_system(&m, &e).unwrap_err() {
        Error::Record { word, line, .. } => assert_eq!((word.as_str(), line), ("cat", 3)),
        other => panic!("{other}"),
    }

    let e = write(
        dir.path(),
        "dup.jsonl",
        r#"{"word": "dog", "modality": "visual", "index": 0, "vector": [1, 2]}
{"word": "dog", "modality": "visual", "index": 0, "vector": [1, 2]}
"#,
    );
    assert!(load_system(&m, &e).unwrap_err().to_string().contains("duplicate"));

    let dup_manifest = MANIFEST.replace("\"run\"", "\"dog\"");
    let m2 = write(dir.path(), "dup_manifest.json", &dup_manifest);
    match load_system(&m2, &e).unwrap_err() {
        Error::Record { word, line, .. } => {
            assert_eq!(word, "dog");
            assert_eq!(line, 3);
        }
        other => panic!("{other}"),
    }
}

#[test]
fn missing_index_and_bad_json() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "manifest.json", MANIFEST);
    let e = write(
        dir.path(),
        "e.jsonl",
        r#"{"word": "dog", "modality": "visual", "index": 0, "vector": [1, 2]}
"#,
    );
    let msg = load_system(&m, &e).unwrap_err().to_string();
    assert!(msg.contains("missing linguistic exemplar index 0"), "{msg}");

    let e = write(dir.path(), "bad.jsonl", "{\"word\": \"dog\", \"modality\": \"smell\"}\n");
    assert!(matches!(load_system(&m, &e).unwrap_err(), Error::Parse { line: 1, .. }));

    let e = write(
        dir.path(),
        "nan.jsonl",
        "{\"word\": \"dog\", \"modality\": \"visual\", \"index\": 0, \"vector\": [NaN, 2]}\n",
    );
    assert!(load_system(&m, &e).is_err());
    assert!(load_system(&dir.path().join("absent.json"), &e).unwrap_err().is_environmental());
}

fn bits(s: &LexicalSystem) -> Vec<u64> {
    s.words
        .iter()
        .flat_map(|w| Modality::BOTH.into_iter().flat_map(move |m| w.exemplars(m).iter()))
        .flat_map(|v| v.iter().map(|x| x.to_bits()))
        .collect()
}

#[test]
fn write_then_load_is_bit_exact_over_random_systems() {
    let dir = tempfile::tempdir().unwrap();
    let (m, e) = (dir.path().join("m.json"), dir.path().join("e.jsonl"));
    let mut rng = SplitMix64::new(0xB17E_0AC7);
    for trial in 0..100 {
        let n = 2 + rng.below(6) as usize;
        let (dv, dl) = (1 + rng.below(6) as usize, 1 + rng.below(6) as usize);
        let mut s = common::random_system(&mut rng, n, dv, dl, (1, 4));
        for w in &mut s.words {
            for v in w.visual_exemplars.iter_mut().chain(w.linguistic_exemplars.iter_mut()) {
                for x in v.iter_mut() {
                    *x = match rng.below(4) {
                        0 => common::any_finite(&mut rng),
                        1 => *x * 1e-310,
                        2 => -0.0,
                        _ => *x,
                    };
                }
            }
        }
        s.name = format!("trial \"{trial}\" ü");
        write_system(&s, &m, &e).unwrap();
        let back = load_system(&m, &e).unwrap();
        assert_eq!(back.name, s.name);
        assert_eq!(bits(&back), bits(&s), "trial {trial}");
        assert_eq!(back.words.len(), s.words.len());
        for (a, b) in back.words.iter().zip(&s.words) {
            assert_eq!((&a.word, a.word_type), (&b.word, b.word_type));
        }
    }
}

#[test]
fn empty_modality_is_an_error_naming_the_word() {
    let mut rng = SplitMix64::new(5);
    let mut s = common::random_system(&mut rng, 3, 2, 2, (1, 3));
    s.words[1].linguistic_exemplars.clear();
    let r = validate(&s);
    assert!(!r.ok);
    assert!(r
        .issues
        .iter()
        .any(|i| i.severity == Severity::Error && i.word.as_deref() == Some("word1")));
}

#[test]
fn injected_nan_is_found_with_word_and_exemplar() {
    let mut rng = SplitMix64::new(0x0A0A);
    for _ in 0..200 {
        let mut s = common::random_system(&mut rng, 4, 3, 5, (1, 5));
        let w = rng.below(4) as usize;
        let m = if rng.below(2) == 0 { Modality::Visual } else { Modality::Linguistic };
        let entry = &mut s.words[w];
        let list = match m {
            Modality::Visual => &mut entry.visual_exemplars,
            Modality::Linguistic => &mut entry.linguistic_exemplars,
        };
        let j = rng.below(list.len() as u64) as usize;
        let c = rng.below(list[j].len() as u64) as usize;
        list[j][c] = [f64::NAN, f64::INFINITY, f64::NEG_INFINITY][rng.below(3) as usize];

        let r = validate(&s);
        assert!(!r.ok);
        let errors: Vec<_> = r.issues.iter().filter(|i| i.severity == Severity::Error).collect();
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].word.as_deref(), Some(format!("word{w}").as_str()));
        assert!(errors[0].message.contains(&format!("{m} exemplar {j} ")), "{}", errors[0].message);
        assert!(LexicalSystem::new(s.name.clone(), 3, 5, s.words.clone()).is_err());
    }
}

#[test]
fn structural_problems_are_all_listed() {
    let w = |name: &str, v: Vec<Vec<f64>>| WordEntry {
        word: name.into(),
        word_type: WordType::Noun,
        visual_exemplars: v,
        linguistic_exemplars: vec![vec![1.0]],
    };
    let s = LexicalSystem {
        name: "bad".into(),
        dim_visual: 2,
        dim_linguistic: 1,
        words: vec![w("a", vec![vec![1.0, 2.0]]), w("a", vec![vec![1.0]])],
    };
    let r = validate(&s);
    assert!(!r.ok);
    assert_eq!(r.issues.len(), 2, "{:?}", r.issues);

    let zero = LexicalSystem {
        name: "zero".into(),
        dim_visual: 1,
        dim_linguistic: 1,
        words: vec![w("a", vec![vec![1.0], vec![-1.0]]), w("b", vec![vec![1.0]])],
    };
    let r = validate(&zero);
    assert!(r.ok);
    assert_eq!(r.issues.len(), 1);
    assert_eq!(r.issues[0].severity, Severity::Warning);
}

#[test]
fn subsample_all_exemplars_selects_everything() {
    let mut rng = SplitMix64::new(17);
    let s = common::random_system(&mut rng, 5, 2, 2, (6, 6));
    let v = subsample(&s, 6, 6, 99).unwrap();
    for w in 0..5 {
        for m in Modality::BOTH {
            let set: HashSet<usize> = v.selected(w, m).iter().copied().collect();
            assert_eq!(set, (0..6).collect());
        }
    }
}

#[test]
fn subsample_is_deterministic_and_names_short_words() {
    let mut rng = SplitMix64::new(18);
    let s = common::random_system(&mut rng, 5, 2, 2, (3, 9));
    let k = s.words.iter().map(|w| w.visual_exemplars.len()).min().unwrap();
    assert_eq!(subsample(&s, k, 1, 7).unwrap(), subsample(&s, k, 1, 7).unwrap());
    let first_short = &s.words.iter().find(|w| w.visual_exemplars.len() == k).unwrap().word;
    match subsample(&s, k + 1, 1, 7).unwrap_err() {
        Error::InsufficientExemplars { word, requested, available, .. } => {
            assert_eq!(&word, first_short);
            assert_eq!((requested, available), (k + 1, k));
        }
        other => panic!("{other}"),
    }
    assert!(subsample(&s, 0, 1, 7).is_err());
}

#[test]
fn subsample_prefix_property_over_random_pairs() {
    let mut rng = SplitMix64::new(0x9E37);
    for _ in 0..1000 {
        let n_ex = 2 + rng.below(12) as usize;
        let n_words = 2 + rng.below(4) as usize;
        let s = common::random_system(&mut rng, n_words, 1, 1, (n_ex, n_ex));
        let seed = rng.next_u64();
        let k = 1 + rng.below(n_ex as u64 - 1) as usize;
        let k2 = k + 1 + rng.below((n_ex - k) as u64) as usize;
        let (small, big) = (subsample(&s, k, k, seed).unwrap(), subsample(&s, k2, k2, seed).unwrap());
        for w in 0..s.n_words() {
            for m in Modality::BOTH {
                assert_eq!(small.selected(w, m), &big.selected(w, m)[..k]);
            }
        }
        assert_eq!(big.truncated(k, k).unwrap(), small);
    }
}

proptest! {
    #[test]
    fn subsample_selects_unique_indices(seed in any::<u64>(), kv in 1usize..8, kl in 1usize..8) {
        let mut rng = SplitMix64::new(seed ^ 0x55);
        let s = common::random_system(&mut rng, 4, 1, 1, (8, 12));
        let v = subsample(&s, kv, kl, seed).unwrap();
        for w in 0..4 {
            for (m, k) in [(Modality::Visual, kv), (Modality::Linguistic, kl)] {
                let sel = v.selected(w, m);
                prop_assert_eq!(sel.len(), k);
                let set: HashSet<_> = sel.iter().collect();
                prop_assert_eq!(set.len(), k);
                prop_assert!(sel.iter().all(|&i| i < s.words[w].exemplars(m).len()));
            }
        }
    }
}
