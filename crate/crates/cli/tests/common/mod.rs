#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Parser;
use visionseg_cli::args::{Cli, Command, EvalArgs, FormatArgs, SegmentArgs, SynthArgs};

pub fn parse(argv: &[&str]) -> Command {
    let mut full = vec!["visionseg"];
    full.extend_from_slice(argv);
    Cli::try_parse_from(full).expect("valid arguments").command
}

pub fn segment_args(argv: &[&str]) -> SegmentArgs {
    let mut full = vec!["segment"];
    full.extend_from_slice(argv);
    match parse(&full) {
        Command::Segment(mut a) => {
            if !argv.contains(&"--weights") {
                a.weights = None;
            }
            a
        }
        _ => unreachable!(),
    }
}

pub fn synth_args(argv: &[&str]) -> SynthArgs {
    let mut full = vec!["synth"];
    full.extend_from_slice(argv);
    match parse(&full) {
        Command::Synth(a) => a,
        _ => unreachable!(),
    }
}

pub fn eval_args(argv: &[&str]) -> EvalArgs {
    let mut full = vec!["eval"];
    full.extend_from_slice(argv);
    match parse(&full) {
        Command::Eval(a) => a,
        _ => unreachable!(),
    }
}

pub fn format_args(argv: &[&str]) -> FormatArgs {
    let mut full = vec!["format"];
    full.extend_from_slice(argv);
    match parse(&full) {
        Command::Format(a) => a,
        _ => unreachable!(),
    }
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("UTF-8 temp path")
}

/// Metadata file listing every page of a corpus as one piece.
pub fn write_metadata(path: &Path, page_ids: &[String]) {
    let meta = serde_json::json!({
        "scenario": "composer-fixed",
        "pieces": [{
            "piece_id": "synthetic",
            "title": "Synthetic Etudes",
            "author": "Generator",
            "key": "C major",
            "pages": page_ids,
        }]
    });
    std::fs::write(path, serde_json::to_vec_pretty(&meta).unwrap()).unwrap();
}

/// Every file under `root`, keyed by relative path.
pub fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
