//! `RSFW1` binary field snapshots.
//!
//! Layout: the magic line `RSFW1\n`, one ASCII header line
//! `dim N_1 .. N_d L_1 .. L_d eps t [tag]\n`, then `prod N_j` pairs of
//! little-endian `f64` `(re, im)` in row-major order. Real fields are stored
//! with zero imaginary part and carry a component tag (`alpha`, `beta`,
//! `v1`, ...). Decimal header values use the shortest round-trip formatting,
//! so a write/read cycle is bit-exact.

use std::fs;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::grid::GridSpec;

pub const MAGIC: &[u8] = b"RSFW1\n";

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub grid: GridSpec,
    pub eps: f64,
    pub t: f64,
    pub tag: Option<String>,
    pub values: Vec<Complex64>,
}

impl Snapshot {
    pub fn from_wave(psi: &WaveField) -> Self {
        Self {
            grid: psi.grid.clone(),
            eps: psi.eps,
            t: psi.t,
            tag: None,
            values: psi.values.clone(),
        }
    }

    pub fn from_real(grid: &GridSpec, values: &[f64], eps: f64, t: f64, tag: &str) -> Self {
        Self {
            grid: grid.clone(),
            eps,
            t,
            tag: Some(tag.to_string()),
            values: values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn into_wave(self) -> Result<WaveField> {
        WaveField::new(self.grid, self.values, self.t, self.eps)
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 16 * self.values.len());
        out.extend_from_slice(MAGIC);
        let mut header = vec![self.grid.dim().to_string()];
        header.extend(self.grid.points().iter().map(|n| n.to_string()));
        header.extend(self.grid.half_extents().iter().map(|l| l.to_string()));
        header.push(self.eps.to_string());
        header.push(self.t.to_string());
        if let Some(tag) = &self.tag {
            header.push(tag.clone());
        }
        out.extend_from_slice(header.join(" ").as_bytes());
        out.push(b'\n');
        for z in &self.values {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = std::io::Cursor::new(bytes);
        let mut magic = [0u8; 6];
        cursor
            .read_exact(&mut magic)
            .map_err(|_| Error::Format("truncated magic".into()))?;
        if magic != MAGIC {
            return Err(Error::Format("bad magic, expected RSFW1".into()));
        }
        let mut line = String::new();
        cursor
            .read_line(&mut line)
            .map_err(|e| Error::Format(format!("header: {e}")))?;
        if !line.ends_with('\n') {
            return Err(Error::Format("unterminated header line".into()));
        }
        let tokens: Vec<&str> = line.trim_end_matches('\n').split(' ').collect();
        let dim: usize = tokens
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format("missing dimension".into()))?;
        let base = 1 + 2 * dim + 2;
        if tokens.len() != base && tokens.len() != base + 1 {
            return Err(Error::Format(format!(
                "header has {} fields, expected {base} or {}",
                tokens.len(),
                base + 1
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad number `{s}`")))
        };
        let points = tokens[1..1 + dim]
            .iter()
            .map(|s| s.parse::<usize>().map_err(|_| Error::Format(format!("bad size `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        let half = tokens[1 + dim..1 + 2 * dim]
            .iter()
            .map(|s| num(s))
            .collect::<Result<Vec<_>>>()?;
        let grid = GridSpec::new(points, half).map_err(|e| Error::Format(e.to_string()))?;
        let eps = num(tokens[1 + 2 * dim])?;
        let t = num(tokens[2 + 2 * dim])?;
        let tag = tokens.get(base).map(|s| s.to_string());
        let offset = cursor.position() as usize;
        let payload = &bytes[offset..];
        if payload.len() != 16 * grid.len() {
            return Err(Error::Format(format!(
                "payload has {} bytes, expected {}",
                payload.len(),
                16 * grid.len()
            )));
        }
        let values = payload
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Ok(Self {
            grid,
            eps,
            t,
            tag,
            values,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(
            seed in any::<u64>(),
            eps in 1e-6f64..10.0,
            t in -100.0f64..100.0,
            l in 0.1f64..50.0,
            tagged in any::<bool>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let grid = GridSpec::new(vec![8, 16], vec![l, l * 1.5]).unwrap();
            let values = (0..grid.len())
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, f64::from_bits(rng.gen::<u64>() >> 2)))
                .collect();
            let snap = Snapshot { grid, eps, t, tag: tagged.then(|| "v1".to_string()), values };
            let back = Snapshot::from_bytes(&snap.to_bytes()).unwrap();
            prop_assert_eq!(back.to_bytes(), snap.to_bytes());
            prop_assert_eq!(back.eps.to_bits(), snap.eps.to_bits());
            prop_assert_eq!(back.t.to_bits(), snap.t.to_bits());
            prop_assert_eq!(back, snap);
        }
    }

    #[test]
    fn header_layout() {
        let grid = GridSpec::uniform(2, 8, 8.0).unwrap();
        let snap = Snapshot::from_real(&grid, &vec![1.0; 64], 0.25, 0.5, "alpha");
        let bytes = snap.to_bytes();
        assert!(bytes.starts_with(b"RSFW1\n2 8 8 8 8 0.25 0.5 alpha\n"));
        assert_eq!(bytes.len(), 6 + 25 + 64 * 16);
    }

    #[test]
    fn rejects_corruption() {
        let grid = GridSpec::uniform(2, 8, 1.0).unwrap();
        let snap = Snapshot::from_real(&grid, &vec![0.0; 64], 1.0, 0.0, "beta");
        let mut bytes = snap.to_bytes();
        bytes.pop();
        assert!(Snapshot::from_bytes(&bytes).is_err());
        assert!(Snapshot::from_bytes(b"RSFW2\n").is_err());
    }
}
