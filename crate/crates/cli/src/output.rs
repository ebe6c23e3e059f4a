use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use expendist::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Enough to rerun a command and check that the output is unchanged.
#[derive(Debug, Serialize)]
pub struct Provenance {
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub version: &'static str,
}

impl Provenance {
    pub fn new<'a>(inputs: impl IntoIterator<Item = &'a Path>, seed: u64) -> Result<Self> {
        let inputs = inputs
            .into_iter()
            .map(|p| {
                let bytes = std::fs::read(p)?;
                Ok(InputDigest {
                    path: p.display().to_string(),
                    sha256: hex::encode(Sha256::digest(&bytes)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Provenance {
            inputs,
            seed,
            version: env!("CARGO_PKG_VERSION"),
        })
    }
}

/// Writer for `--out`, or standard output.
pub fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

/// Pretty JSON of `body` with a `provenance` member appended.
pub fn write_json<T: Serialize>(out: &Option<PathBuf>, body: &T, provenance: Provenance) -> Result<()> {
    let mut value = serde_json::to_value(body)?;
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("provenance".into(), serde_json::to_value(provenance)?);
    }
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, &value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
