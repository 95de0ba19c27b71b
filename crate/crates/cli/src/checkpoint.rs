//! Classifier checkpoints: `manifest.txt` (key=value) plus `w1.csv` and
//! `w2.csv`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use graphcal::io;
use graphcal::{Error, GcnParams, Result};

pub const MANIFEST: &str = "manifest.txt";
const FORMAT: &str = "graphcal-gcn-1";

/// How the dataset split of a run was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitSource {
    /// `masks.csv` of the dataset directory.
    File,
    Generated {
        labels_per_class: usize,
        val_size: usize,
        test_size: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub seed: u64,
    pub split: SplitSource,
    pub raw_features: bool,
    pub best_epoch: usize,
}

pub fn write(dir: &Path, params: &GcnParams, manifest: &Manifest) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "format={FORMAT}").unwrap();
    writeln!(text, "input_dim={}", params.input_dim()).unwrap();
    writeln!(text, "hidden={}", params.hidden_dim()).unwrap();
    writeln!(text, "classes={}", params.output_dim()).unwrap();
    writeln!(text, "seed={}", manifest.seed).unwrap();
    writeln!(text, "raw_features={}", manifest.raw_features).unwrap();
    writeln!(text, "best_epoch={}", manifest.best_epoch).unwrap();
    match &manifest.split {
        SplitSource::File => writeln!(text, "split=file").unwrap(),
        SplitSource::Generated {
            labels_per_class,
            val_size,
            test_size,
            seed,
        } => {
            writeln!(text, "split=generated").unwrap();
            writeln!(text, "labels_per_class={labels_per_class}").unwrap();
            writeln!(text, "val_size={val_size}").unwrap();
            writeln!(text, "test_size={test_size}").unwrap();
            writeln!(text, "split_seed={seed}").unwrap();
        }
    }
    io::write_string(&dir.join(MANIFEST), &text)?;
    io::write_matrix(&dir.join("w1.csv"), &params.w1)?;
    io::write_matrix(&dir.join("w2.csv"), &params.w2)
}

pub fn read(dir: &Path) -> Result<(GcnParams, Manifest)> {
    let path = dir.join(MANIFEST);
    let mut keys = BTreeMap::new();
    for rec in io::read_records(&path)? {
        let joined = rec.fields.join(" ");
        let (k, v) = joined
            .split_once('=')
            .ok_or_else(|| io::parse_error(&path, rec.line, "expected key=value"))?;
        keys.insert(k.trim().to_string(), (v.trim().to_string(), rec.line));
    }
    let get = |key: &str| -> Result<&str> {
        keys.get(key)
            .map(|(v, _)| v.as_str())
            .ok_or_else(|| io::parse_error(&path, 0, format!("missing key {key}")))
    };
    let num = |key: &str| -> Result<u64> {
        let (v, line) = keys
            .get(key)
            .ok_or_else(|| io::parse_error(&path, 0, format!("missing key {key}")))?;
        v.parse()
            .map_err(|_| io::parse_error(&path, *line, format!("{key} must be a nonnegative integer")))
    };
    if get("format")? != FORMAT {
        return Err(io::parse_error(&path, 1, format!("unsupported checkpoint format, expected {FORMAT}")));
    }
    let split = match get("split")? {
        "file" => SplitSource::File,
        "generated" => SplitSource::Generated {
            labels_per_class: num("labels_per_class")? as usize,
            val_size: num("val_size")? as usize,
            test_size: num("test_size")? as usize,
            seed: num("split_seed")?,
        },
        other => return Err(io::parse_error(&path, 0, format!("unknown split source {other:?}"))),
    };
    let manifest = Manifest {
        seed: num("seed")?,
        split,
        raw_features: get("raw_features")? == "true",
        best_epoch: num("best_epoch")? as usize,
    };
    let params = GcnParams::new(io::read_matrix(&dir.join("w1.csv"))?, io::read_matrix(&dir.join("w2.csv"))?)?;
    let expect = [
        ("input_dim", params.input_dim()),
        ("hidden", params.hidden_dim()),
        ("classes", params.output_dim()),
    ];
    for (key, actual) in expect {
        if num(key)? as usize != actual {
            return Err(Error::Input(format!(
                "{}: {key} does not match the stored weights ({actual})",
                path.display()
            )));
        }
    }
    Ok((params, manifest))
}
