use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use graphod::bundle::{self, EDGES_FILE, FEATURES_FILE, LABELS_FILE, META_FILE};
use graphod::rng::seeded;
use graphod::synth::Recipe;
use graphod::Error;
use rand::Rng as _;

fn save_recipe(dir: &Path, recipe: &Recipe) {
    let (g, labels) = recipe.build().unwrap();
    bundle::save(dir, &g, Some(&labels), Some(recipe)).unwrap();
}

#[test]
fn gen_time_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = Recipe::gen_time(3);
    let (g, labels) = recipe.build().unwrap();
    bundle::save(dir.path(), &g, Some(&labels), Some(&recipe)).unwrap();
    let b = bundle::load(dir.path()).unwrap();
    assert_eq!(b.graph.row_offsets(), g.row_offsets());
    assert_eq!(b.graph.col_indices(), g.col_indices());
    let same_bits = b
        .graph
        .features()
        .as_slice()
        .iter()
        .zip(g.features().as_slice())
        .all(|(a, c)| a.to_bits() == c.to_bits());
    assert!(same_bits);
    assert_eq!(b.labels.unwrap(), labels);
    assert_eq!(b.meta.provenance.as_ref(), Some(&recipe));
}

#[test]
fn regenerated_bundle_has_identical_edges_file() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    save_recipe(a.path(), &Recipe::gen_time(9));
    let meta = bundle::load(a.path()).unwrap().meta;
    let (g, labels) = bundle::regenerate(&meta).unwrap();
    bundle::save(b.path(), &g, Some(&labels), meta.provenance.as_ref()).unwrap();
    for f in [EDGES_FILE, FEATURES_FILE, LABELS_FILE, META_FILE] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs after regeneration");
    }
}

#[test]
fn truncated_features_name_file_and_row() {
    let dir = tempfile::tempdir().unwrap();
    save_recipe(dir.path(), &Recipe::gen_size(100, 1));
    let path = dir.path().join(FEATURES_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = text.lines().take(40).collect();
    fs::write(&path, kept.join("\n") + "\n").unwrap();
    match bundle::load(dir.path()) {
        Err(Error::Bundle { path: p, line, msg }) => {
            assert!(p.ends_with(FEATURES_FILE));
            assert_eq!(line, 41);
            assert!(msg.contains("found 40"), "{msg}");
        }
        other => panic!("expected a bundle error, got {other:?}"),
    }
    // A row cut mid-way is reported on its own line.
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let short: Vec<&str> = lines[6].split(',').take(3).collect();
    lines[6] = short.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let err = bundle::load(dir.path()).unwrap_err().to_string();
    assert!(err.contains("features.csv") && err.contains(":7"), "{err}");
}

#[test]
fn unknown_label_kind_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    save_recipe(dir.path(), &Recipe::gen_size(100, 2));
    let path = dir.path().join(LABELS_FILE);
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replacen("structural", "global", 1)).unwrap();
    let err = bundle::load(dir.path()).unwrap_err().to_string();
    assert!(err.contains("unknown kind 'global'"), "{err}");
    fs::write(&path, "node_id,kind\n3,none\n").unwrap();
    assert!(bundle::load(dir.path()).is_err());
}

#[test]
fn inconsistent_counts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    save_recipe(dir.path(), &Recipe::gen_size(100, 4));
    let meta_path = dir.path().join(META_FILE);
    let meta = fs::read_to_string(&meta_path).unwrap();
    fs::write(&meta_path, meta.replace("\"num_nodes\": 100", "\"num_nodes\": 1000000000000")).unwrap();
    assert!(bundle::load(dir.path()).is_err());
    fs::write(&meta_path, meta.replace("\"num_features\": 64", "\"num_features\": 63")).unwrap();
    assert!(bundle::load(dir.path()).is_err());
}

/// One random corruption of a bundle file's text.
fn mutate(text: &str, rng: &mut graphod::rng::Rng) -> String {
    let mut bytes = text.as_bytes().to_vec();
    let junk: &[&[u8]] = &[
        b",", b"\n", b"-", b"NaN", b"inf", b"1e999", b"99999999999999999999", b"\"", b"{", b"}", b"x",
        b"0", b"-1", b" ", b"\r\n", b"structural", b"none", b"null", b"\xff",
    ];
    match rng.random_range(0..6) {
        0 if !bytes.is_empty() => {
            let cut = rng.random_range(0..bytes.len());
            bytes.truncate(cut);
        }
        1 if !bytes.is_empty() => {
            let i = rng.random_range(0..bytes.len());
            bytes[i] = rng.random();
        }
        2 => {
            let i = rng.random_range(0..=bytes.len());
            let piece = junk[rng.random_range(0..junk.len())];
            bytes.splice(i..i, piece.iter().copied());
        }
        3 => {
            let lines: Vec<&str> = text.lines().collect();
            if !lines.is_empty() {
                let i = rng.random_range(0..lines.len());
                let mut out: Vec<&str> = lines.clone();
                if rng.random() {
                    out.insert(i, lines[i]);
                } else {
                    out.remove(i);
                }
                return out.join("\n") + "\n";
            }
        }
        4 if !bytes.is_empty() => {
            let i = rng.random_range(0..bytes.len());
            let j = rng.random_range(i..bytes.len());
            bytes.drain(i..=j);
        }
        _ => bytes.clear(),
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

#[test]
fn fuzzed_bundles_never_crash() {
    let base = tempfile::tempdir().unwrap();
    let recipe = Recipe::combined(40, 4, 2, true, 5);
    save_recipe(base.path(), &recipe);
    let files = [META_FILE, EDGES_FILE, FEATURES_FILE, LABELS_FILE];
    let originals: Vec<String> = files
        .iter()
        .map(|f| fs::read_to_string(base.path().join(f)).unwrap())
        .collect();
    let mut rng = seeded(2024);
    let (mut ok, mut rejected) = (0, 0);
    let work = tempfile::tempdir().unwrap();
    for case in 0..1000 {
        let target = rng.random_range(0..files.len());
        for (f, text) in files.iter().zip(&originals) {
            fs::write(work.path().join(f), text).unwrap();
        }
        let mutated = mutate(&originals[target], &mut rng);
        fs::write(work.path().join(files[target]), mutated).unwrap();
        if rng.random_range(0..10) == 0 {
            fs::remove_file(work.path().join(files[rng.random_range(0..files.len())])).unwrap();
        }
        let outcome = catch_unwind(AssertUnwindSafe(|| bundle::load(work.path())));
        match outcome {
            Ok(Ok(_)) => ok += 1,
            Ok(Err(_)) => rejected += 1,
            Err(_) => panic!("loader panicked on fuzz case {case}"),
        }
    }
    assert_eq!(ok + rejected, 1000);
    assert!(rejected > 500, "only {rejected} corruptions detected");
}
