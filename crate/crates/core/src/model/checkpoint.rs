//! Checkpoints are directories holding a `manifest.txt` of `key=value` lines
//! and one CSV per tensor (`fd_<a>.csv`, `fk_<a>.csv`, `reward.csv`).
//!
//! Floats are written with Rust's shortest round-trip formatting, so loading
//! a checkpoint reproduces the model bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::factorized::FactorizedModel;
use crate::error::{Result, VeqError};
use crate::mdp::ModelView;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub objective: String,
}

fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut text = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let err = |line: usize, msg: String| VeqError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != rows {
        return Err(err(
            0,
            format!("expected {rows} rows, found {}", lines.len()),
        ));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for (i, line) in lines.iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols {
            return Err(err(
                i + 1,
                format!("expected {cols} columns, found {}", cells.len()),
            ));
        }
        for (j, c) in cells.iter().enumerate() {
            m[(i, j)] = c.trim().parse().map_err(|e| err(i + 1, format!("{e}")))?;
        }
    }
    Ok(m)
}

pub fn save_checkpoint(dir: &Path, model: &FactorizedModel, meta: &CheckpointMeta) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = format!(
        "n_states={}\nn_actions={}\nrank={}\ngamma={}\nseed={}\nobjective={}\n",
        model.n_states(),
        model.n_actions(),
        model.rank(),
        model.gamma(),
        meta.seed,
        meta.objective
    );
    fs::write(dir.join("manifest.txt"), manifest)?;
    for a in 0..model.n_actions() {
        write_matrix(&dir.join(format!("fd_{a}.csv")), model.d_logits(a))?;
        write_matrix(&dir.join(format!("fk_{a}.csv")), model.k_logits(a))?;
    }
    write_matrix(&dir.join("reward.csv"), model.rewards())
}

pub fn load_checkpoint(dir: &Path) -> Result<(FactorizedModel, CheckpointMeta)> {
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path)?;
    let mut kv = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| VeqError::Parse {
            path: path.clone(),
            line: i + 1,
            msg: "expected key=value".into(),
        })?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |key: &str| {
        kv.get(key).ok_or_else(|| VeqError::Parse {
            path: path.clone(),
            line: 0,
            msg: format!("missing key '{key}'"),
        })
    };
    let num = |key: &str| -> Result<usize> {
        get(key)?.parse().map_err(|e| VeqError::Parse {
            path: path.clone(),
            line: 0,
            msg: format!("{key}: {e}"),
        })
    };
    let (n, m, k) = (num("n_states")?, num("n_actions")?, num("rank")?);
    let gamma: f64 = get("gamma")?.parse().map_err(|e| VeqError::Parse {
        path: path.clone(),
        line: 0,
        msg: format!("gamma: {e}"),
    })?;
    let seed: u64 = get("seed")?.parse().map_err(|e| VeqError::Parse {
        path: path.clone(),
        line: 0,
        msg: format!("seed: {e}"),
    })?;
    let objective = get("objective")?.clone();

    let mut model = FactorizedModel::zeros(n, m, k, gamma)?;
    let fd = (0..m)
        .map(|a| read_matrix(&dir.join(format!("fd_{a}.csv")), n, k))
        .collect::<Result<Vec<_>>>()?;
    let fk = (0..m)
        .map(|a| read_matrix(&dir.join(format!("fk_{a}.csv")), k, n))
        .collect::<Result<Vec<_>>>()?;
    model.set_logits(fd, fk)?;
    model.set_reward(read_matrix(&dir.join("reward.csv"), n, m)?)?;
    Ok((model, CheckpointMeta { seed, objective }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_model;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut model = init_model(7, 3, 2, 0.99, 42).unwrap();
        model
            .set_reward(DMatrix::from_fn(7, 3, |s, a| {
                (s as f64 + 0.1) / (a as f64 + 3.0)
            }))
            .unwrap();
        let meta = CheckpointMeta {
            seed: 42,
            objective: "ve".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &model, &meta).unwrap();
        let (back, back_meta) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back_meta, meta);
        assert_eq!(back.gamma().to_bits(), model.gamma().to_bits());
        for a in 0..3 {
            assert_eq!(back.d_logits(a), model.d_logits(a));
            assert_eq!(back.k_logits(a), model.k_logits(a));
        }
        assert_eq!(back.rewards(), model.rewards());
    }

    #[test]
    fn truncated_tensor_is_rejected() {
        let model = init_model(4, 2, 2, 0.9, 1).unwrap();
        let meta = CheckpointMeta {
            seed: 1,
            objective: "mle".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &model, &meta).unwrap();
        fs::write(dir.path().join("fk_1.csv"), "0.1,0.2\n").unwrap();
        assert!(load_checkpoint(dir.path()).is_err());
    }
}
