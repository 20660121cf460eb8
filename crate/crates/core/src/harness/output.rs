//! Artifact directory writer.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub name: String,
    pub sha256: String,
}

/// Audit record written last into every artifact directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub model: String,
    pub config_sha256: String,
    pub code_version: String,
    pub master_seed: u64,
    pub replicas: u64,
    pub files: Vec<ManifestFile>,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) struct Artifact {
    dir: PathBuf,
    files: Vec<ManifestFile>,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv serialization: {other:?}")),
    }
}

impl Artifact {
    pub(crate) fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifact {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub(crate) fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.push(ManifestFile {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub(crate) fn write_csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.write_bytes(name, &bytes)
    }

    pub(crate) fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Records a file written by someone else (a nested artifact).
    pub(crate) fn adopt(&mut self, name: &str) -> Result<()> {
        let bytes = fs::read(self.dir.join(name))?;
        self.files.push(ManifestFile {
            name: name.to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub(crate) fn finish(mut self, model: &str, config_sha256: String, master_seed: u64, replicas: u64) -> Result<Manifest> {
        self.files.sort_by(|a, b| a.name.cmp(&b.name));
        let manifest = Manifest {
            model: model.to_string(),
            config_sha256,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            replicas,
            files: std::mem::take(&mut self.files),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(manifest)
    }
}

const PLOT_HEADER: &str = r#"#!/usr/bin/env python3
import csv, json, os
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def rows(name):
    with open(os.path.join(here, name)) as f:
        return list(csv.DictReader(f))


def col(rs, key):
    return [float(r[key]) for r in rs]

"#;

pub(crate) fn plot_script(model: &str) -> String {
    let body = match model {
        "ssep" | "zero_range" => {
            r#"prof = rows("profile.csv")
last = max(col(prof, "t_macro"))
sel = [r for r in prof if float(r["t_macro"]) == last]
xs = col(sel, "y")
plt.errorbar(xs, col(sel, "mean"), yerr=col(sel, "stderr"), fmt=".", label="simulation")
plt.plot(xs, col(sel, "reference"), "-", label="reference")
plt.xlabel("y")
plt.ylabel("density")
plt.legend()
plt.savefig(os.path.join(here, "profile.png"), dpi=120)
"#
        }
        "chain" => {
            r#"fig, ax = plt.subplots(1, 2, figsize=(10, 4))
prof = rows("strain_profile.csv")
last = max(col(prof, "t_macro"))
sel = [r for r in prof if float(r["t_macro"]) == last]
ax[0].errorbar(col(sel, "y"), col(sel, "mean"), yerr=col(sel, "stderr"), fmt=".")
ax[0].plot(col(sel, "y"), col(sel, "reference"), "-")
ax[0].set_xlabel("y")
ax[0].set_ylabel("strain")
with open(os.path.join(here, "clausius.json")) as f:
    cl = json.load(f)
ax[1].plot([r["t"] for r in cl], [r["W"] for r in cl], label="W")
ax[1].plot([r["t"] for r in cl], [r["dF"] for r in cl], label="dF")
ax[1].set_xlabel("t")
ax[1].legend()
fig.savefig(os.path.join(here, "chain.png"), dpi=120)
"#
        }
        "dual" => {
            r#"sv = rows("survival.csv")
pts = [(float(r["s"]), float(r["tail"])) for r in sv if float(r["tail"]) > 0]
plt.semilogy([p[0] for p in pts], [p[1] for p in pts], "o-")
plt.xlabel("s")
plt.ylabel("P(tau > s)")
plt.savefig(os.path.join(here, "survival.png"), dpi=120)
"#
        }
        "oracle" => {
            r#"op = rows("one_point.csv")
plt.plot(col(op, "x"), col(op, "rho"), ".-")
plt.xlabel("x")
plt.ylabel("rho")
plt.savefig(os.path.join(here, "one_point.png"), dpi=120)
"#
        }
        "thermo" => {
            r#"tb = rows("table.csv")
for beta in sorted(set(col(tb, "beta"))):
    sel = [r for r in tb if float(r["beta"]) == beta]
    plt.plot(col(sel, "tau"), col(sel, "r"), "o-", label=f"beta={beta}")
plt.xlabel("tau")
plt.ylabel("r")
plt.legend()
plt.savefig(os.path.join(here, "length.png"), dpi=120)
"#
        }
        _ => {
            r#"conv = rows("convergence.csv")
for stat in sorted(set(r["statistic_name"] for r in conv)):
    for alpha in sorted(set(r["alpha"] for r in conv)):
        sel = [r for r in conv if r["statistic_name"] == stat and r["alpha"] == alpha and r["abs_err"]]
        if sel:
            plt.loglog(col(sel, "N"), col(sel, "abs_err"), "o-", label=f"{stat} alpha={alpha}")
plt.xlabel("N")
plt.ylabel("abs_err")
plt.legend(fontsize=6)
plt.savefig(os.path.join(here, "convergence.png"), dpi=120)
"#
        }
    };
    format!("{PLOT_HEADER}{body}")
}
