//! Effective run configuration: a JSON file, overridden by flags.

use std::path::{Path, PathBuf};

use cellboard::exact::Guards;
use cellboard::geometry::{FieldPattern, ModelGeometry, Site};
use cellboard::mc::{Boundary, Init};
use cellboard::model::ModelParams;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    CellBoard,
    Strip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(rename = "L1")]
    pub l1: usize,
    #[serde(rename = "L2")]
    pub l2: usize,
    /// Strip height.
    #[serde(rename = "L")]
    pub l: usize,
    /// Cells per side; defaults to 2 for cell-boards and 4 for strips.
    #[serde(rename = "N")]
    pub n: Option<usize>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            kind: ModelKind::CellBoard,
            l1: 1,
            l2: 1,
            l: 1,
            n: None,
        }
    }
}

impl ModelSpec {
    pub fn geometry(&self) -> cellboard::Result<ModelGeometry> {
        match self.kind {
            ModelKind::CellBoard => {
                ModelGeometry::cell_board(self.l1, self.l2, self.n.unwrap_or(2))
            }
            ModelKind::Strip => ModelGeometry::strip(self.l, self.n.unwrap_or(4)),
        }
    }

    pub fn pattern(&self) -> FieldPattern {
        match self.kind {
            ModelKind::CellBoard => FieldPattern::CellBoard {
                l1: self.l1,
                l2: self.l2,
            },
            ModelKind::Strip => FieldPattern::Strip { l: self.l },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSpec {
    #[serde(rename = "J")]
    pub j: f64,
    pub h: f64,
    pub beta: Vec<f64>,
}

impl Default for ParamSpec {
    fn default() -> Self {
        ParamSpec {
            j: 1.0,
            h: 1.0,
            beta: vec![1.0],
        }
    }
}

impl ParamSpec {
    pub fn at(&self, beta: f64) -> cellboard::Result<ModelParams> {
        ModelParams::new(self.j, self.h, beta)
    }

    pub fn all(&self) -> cellboard::Result<Vec<ModelParams>> {
        self.beta.iter().map(|&b| self.at(b)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinSpec {
    pub t1: usize,
    pub t2: usize,
    pub spin: i8,
}

impl PinSpec {
    /// Parses `t1,t2,spin`.
    pub fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("expected t1,t2,spin, got {s:?}"));
        }
        let num = |p: &str| p.parse::<i64>().map_err(|e| format!("{p:?}: {e}"));
        let (t1, t2, spin) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if t1 < 0 || t2 < 0 || !(spin == 1 || spin == -1) {
            return Err(format!(
                "bad pin {s:?}: coordinates must be >= 0 and spin +-1"
            ));
        }
        Ok(PinSpec {
            t1: t1 as usize,
            t2: t2 as usize,
            spin: spin as i8,
        })
    }

    pub fn site(&self) -> Site {
        Site::new(self.t1, self.t2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSpec {
    pub init: Init,
    pub sweeps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub chain: u64,
    pub boundary: Option<Boundary>,
    pub pins: Vec<PinSpec>,
    /// Also write the trace as whitespace-delimited columns.
    pub gnuplot: bool,
}

impl Default for McSpec {
    fn default() -> Self {
        McSpec {
            init: Init::Plus,
            sweeps: 20_000,
            burn_in: 2_000,
            thin: 1,
            chain: 0,
            boundary: None,
            pins: Vec::new(),
            gnuplot: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSpec {
    /// Field values of the scan grid; empty means the single `params.h`.
    pub hs: Vec<f64>,
    /// Initial conditions per grid point; empty means plus, minus, random.
    pub inits: Vec<Init>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub params: ParamSpec,
    pub seed: u64,
    pub slow: bool,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    /// Random assignments per `β` for the chessboard check.
    pub samples: usize,
    /// The strip constant `k` of `β₀ = k / (2J - hL)`.
    pub strip_k: Option<f64>,
    pub guards: Guards,
    pub mc: McSpec,
    pub scan: ScanSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelSpec::default(),
            params: ParamSpec::default(),
            seed: 2024,
            slow: false,
            threads: None,
            out: None,
            samples: 50,
            strip_k: None,
            guards: Guards::default(),
            mc: McSpec::default(),
            scan: ScanSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Output directory: `--out`, then `CELLBOARD_OUT_DIR`, then the file's
    /// `out`, then `cellboard-out`.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os("CELLBOARD_OUT_DIR") {
            return PathBuf::from(p);
        }
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("cellboard-out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_fill_defaults() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"model": {"kind": "strip", "L": 2}, "params": {"beta": [0.5, 2]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.model.kind, ModelKind::Strip);
        assert_eq!(cfg.model.geometry().unwrap().dims(), (4, 8));
        assert_eq!(cfg.params.beta, vec![0.5, 2.0]);
        assert_eq!(cfg.params.j, 1.0);
        assert!(serde_json::from_str::<RunConfig>(r#"{"modle": {}}"#).is_err());
    }

    #[test]
    fn round_trips() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn pins_parse() {
        assert_eq!(
            PinSpec::parse("3, 4,-1").unwrap(),
            PinSpec {
                t1: 3,
                t2: 4,
                spin: -1
            }
        );
        assert!(PinSpec::parse("3,4,0").is_err());
        assert!(PinSpec::parse("3,4").is_err());
    }
}
