use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LipGrade, LipJet, OutputNorm};
use crate::error::{LipError, Result};
use crate::tensor::{MultilinearMap, SymTensor};

/// One level at one point: a single tensor when `dim_out = 1`, otherwise one
/// tensor per output coordinate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum LevelRepr {
    Single(SymTensor),
    Stacked(Vec<SymTensor>),
}

/// On-disk jet: `{dim_in, dim_out, gamma, points, levels}` with
/// `levels[point][k]` as above, plus an optional output-norm block structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JetFile {
    dim_in: usize,
    dim_out: usize,
    gamma: f64,
    points: Vec<Vec<f64>>,
    levels: Vec<Vec<LevelRepr>>,
    #[serde(default, skip_serializing_if = "is_uniform")]
    output: OutputNorm,
}

fn is_uniform(o: &OutputNorm) -> bool {
    *o == OutputNorm::Uniform
}

impl From<&LipJet> for JetFile {
    fn from(jet: &LipJet) -> Self {
        let levels = jet
            .all_levels()
            .iter()
            .map(|lv| {
                lv.iter()
                    .map(|l| {
                        if l.out_dim() == 1 {
                            LevelRepr::Single(l.component(0))
                        } else {
                            LevelRepr::Stacked(l.components())
                        }
                    })
                    .collect()
            })
            .collect();
        JetFile {
            dim_in: jet.dim_in(),
            dim_out: jet.dim_out(),
            gamma: jet.gamma(),
            points: jet.points().to_vec(),
            levels,
            output: jet.output().clone(),
        }
    }
}

impl TryFrom<JetFile> for LipJet {
    type Error = LipError;

    fn try_from(f: JetFile) -> Result<Self> {
        let grade = LipGrade::new(f.gamma)?;
        let mut levels = Vec::with_capacity(f.levels.len());
        for (i, lv) in f.levels.into_iter().enumerate() {
            let mut maps = Vec::with_capacity(lv.len());
            for (k, l) in lv.into_iter().enumerate() {
                let parts = match l {
                    LevelRepr::Single(t) => vec![t],
                    LevelRepr::Stacked(ts) => ts,
                };
                if parts.len() != f.dim_out {
                    return Err(LipError::Parse(format!(
                        "levels[{i}][{k}]: expected {} component tensors, found {}",
                        f.dim_out,
                        parts.len()
                    )));
                }
                let m = MultilinearMap::from_components(f.dim_in, k, &parts)
                    .map_err(|e| LipError::Parse(format!("levels[{i}][{k}]: {e}")))?;
                maps.push(m);
            }
            levels.push(maps);
        }
        if let Some((i, p)) = f.points.iter().enumerate().find(|(_, p)| p.len() != f.dim_in) {
            return Err(LipError::Parse(format!(
                "points[{i}] has {} coordinates, dim_in is {}",
                p.len(),
                f.dim_in
            )));
        }
        LipJet::new(grade, f.points, levels)?.with_output(f.output)
    }
}

impl LipJet {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&JetFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: JetFile = serde_json::from_str(s)
            .map_err(|e| LipError::Parse(format!("jet file, line {} column {}: {e}", e.line(), e.column())))?;
        file.try_into()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json(&text)
            .map_err(|e| LipError::Parse(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
