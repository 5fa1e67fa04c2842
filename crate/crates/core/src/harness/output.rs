//! Deterministic output files: CSV tables, JSON reports, and binary
//! trajectory checkpoints with a JSON sidecar.

use crate::error::{Error, Result};
use crate::field::{ModeField, PerturbationState};
use crate::grid::Grid;
use num_complex::Complex64;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

/// Shortest-roundtrip float formatting; stable across runs on one platform.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CheckpointSidecar {
    pub grid: CheckpointGrid,
    pub nu: f64,
    pub t: f64,
    pub layout: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CheckpointGrid {
    pub ly: f64,
    pub ny: usize,
    pub kmax: usize,
}

pub const CHECKPOINT_LAYOUT: &str = "k-major,y-minor,complex-interleaved,le-f64";

/// Write `<base>.bin` (flat little-endian f64 pairs, k-major then y) and
/// `<base>.json`.
pub fn write_checkpoint(
    base: &Path,
    state: &PerturbationState,
    nu: f64,
    config_hash: &str,
) -> Result<()> {
    let grid = state.grid();
    let bin_path = base.with_extension("bin");
    let file = fs::File::create(&bin_path)?;
    let mut w = BufWriter::new(file);
    for mode in &state.modes {
        for v in mode.values() {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    let sidecar = CheckpointSidecar {
        grid: CheckpointGrid {
            ly: grid.ly(),
            ny: grid.ny(),
            kmax: state.kmax(),
        },
        nu,
        t: state.time,
        layout: CHECKPOINT_LAYOUT.into(),
        config_hash: config_hash.into(),
    };
    write_json(&base.with_extension("json"), &sidecar)?;
    Ok(())
}

pub fn read_checkpoint(base: &Path) -> Result<(PerturbationState, CheckpointSidecar)> {
    let text = fs::read_to_string(base.with_extension("json"))?;
    let sidecar: CheckpointSidecar = serde_json::from_str(&text)
        .map_err(|e| Error::config("checkpoint sidecar", e.to_string()))?;
    if sidecar.layout != CHECKPOINT_LAYOUT {
        return Err(Error::config(
            "checkpoint layout",
            format!("unsupported layout {:?}", sidecar.layout),
        ));
    }
    let grid = Arc::new(Grid::new(sidecar.grid.ly, sidecar.grid.ny, sidecar.grid.kmax)?);
    let mut file = fs::File::open(base.with_extension("bin"))?;
    let mut raw = Vec::new();
    file.read_to_end(&mut raw)?;
    let expected = (sidecar.grid.kmax + 1) * sidecar.grid.ny * 16;
    if raw.len() != expected {
        return Err(Error::config(
            "checkpoint payload",
            format!("expected {expected} bytes, found {}", raw.len()),
        ));
    }
    let mut modes = Vec::with_capacity(sidecar.grid.kmax + 1);
    let mut cursor = 0usize;
    for k in 0..=sidecar.grid.kmax {
        let mut values = Vec::with_capacity(sidecar.grid.ny);
        for _ in 0..sidecar.grid.ny {
            let re = f64::from_le_bytes(raw[cursor..cursor + 8].try_into().unwrap());
            let im = f64::from_le_bytes(raw[cursor + 8..cursor + 16].try_into().unwrap());
            cursor += 16;
            values.push(Complex64::new(re, im));
        }
        modes.push(ModeField::from_values(Arc::clone(&grid), k, values)?);
    }
    let mut state = PerturbationState { modes, time: sidecar.t };
    state.time = sidecar.t;
    Ok((state, sidecar))
}

/// File-name-safe tag for a float.
pub fn float_tag(v: f64) -> String {
    fmt_f64(v).replace('+', "").replace('.', "_")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::gaussian_band;

    #[test]
    fn checkpoint_roundtrip() {
        let dir = std::env::temp_dir().join("poiseuille-ck-test");
        fs::create_dir_all(&dir).unwrap();
        let grid = Arc::new(Grid::new(4.0, 16, 2).unwrap());
        let mut state = PerturbationState::zero(&grid);
        state.modes[1] = gaussian_band(&grid, 1, 0.7);
        state.time = 3.25;
        let base = dir.join("ck_test");
        write_checkpoint(&base, &state, 1e-3, "deadbeef").unwrap();
        let (back, sidecar) = read_checkpoint(&base).unwrap();
        assert_eq!(sidecar.config_hash, "deadbeef");
        assert_eq!(back.time, 3.25);
        assert_eq!(back.modes.len(), 3);
        for (a, b) in back.modes[1].values().iter().zip(state.modes[1].values()) {
            assert_eq!(a, b);
        }
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn float_formatting_is_shortest_roundtrip() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(1e-3), "0.001");
        let v = 0.1f64 + 0.2f64;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }
}
