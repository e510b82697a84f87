//! Binary field files.
//!
//! Layout: the magic bytes `CFLD`, then `version`, `n`, `m` and the component
//! count as little-endian `u32`, then `m^n * components` little-endian `f64`
//! samples. Samples are row-major over the grid and the components of one grid
//! point are stored consecutively.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{FieldError, Grid, ScalarField, SymTensorField, VectorField};
use crate::real::Real;

pub const MAGIC: &[u8; 4] = b"CFLD";
pub const VERSION: u32 = 1;

/// Raw contents of a field file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub n: usize,
    pub m: usize,
    /// `components[c][i]` is component `c` at grid point `i`.
    pub components: Vec<Vec<f64>>,
}

impl FieldFile {
    pub fn from_components<T: Real>(comps: &[ScalarField<T>]) -> Self {
        let grid = comps[0].grid();
        Self {
            n: grid.n(),
            m: grid.m(),
            components: comps.iter().map(|c| c.values().iter().map(|v| v.to_f64_lossy()).collect()).collect(),
        }
    }

    pub fn to_writer(&self, mut w: impl Write) -> Result<(), FieldError> {
        let header = [VERSION, self.n as u32, self.m as u32, self.components.len() as u32];
        let len = self.components.first().map_or(0, Vec::len);
        let mut buf = Vec::with_capacity(20 + 8 * len * self.components.len());
        buf.extend_from_slice(MAGIC);
        for h in header {
            buf.extend_from_slice(&h.to_le_bytes());
        }
        for i in 0..len {
            for c in &self.components {
                buf.extend_from_slice(&c[i].to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn from_reader(mut r: impl Read) -> Result<Self, FieldError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 20 || &bytes[..4] != MAGIC {
            return Err(FieldError::Format("missing CFLD header".into()));
        }
        let word = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().expect("4 bytes"));
        let (version, n, m, count) = (word(0), word(1) as usize, word(2) as usize, word(3) as usize);
        if version != VERSION {
            return Err(FieldError::Format(format!("unsupported version {version}")));
        }
        let len = m
            .checked_pow(n as u32)
            .ok_or_else(|| FieldError::Format("grid size overflows".into()))?;
        let expected = 20 + 8 * len * count;
        if bytes.len() != expected {
            return Err(FieldError::Format(format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let mut components = vec![Vec::with_capacity(len); count];
        for (k, chunk) in bytes[20..].chunks_exact(8).enumerate() {
            components[k % count].push(f64::from_le_bytes(chunk.try_into().expect("8 bytes")));
        }
        Ok(Self { n, m, components })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), FieldError> {
        self.to_writer(fs::File::create(path)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, FieldError> {
        Self::from_reader(fs::File::open(path)?)
    }

    pub fn grid<T: Real>(&self) -> Result<Grid<T>, FieldError> {
        Grid::new(self.n, self.m)
    }

    fn scalar_fields<T: Real>(&self, grid: &Grid<T>) -> Result<Vec<ScalarField<T>>, FieldError> {
        if grid.n() != self.n || grid.m() != self.m {
            return Err(FieldError::GridMismatch);
        }
        self.components
            .iter()
            .map(|c| ScalarField::new(grid, c.iter().map(|&v| T::lit(v)).collect()))
            .collect()
    }

    pub fn into_scalar<T: Real>(&self, grid: &Grid<T>) -> Result<ScalarField<T>, FieldError> {
        let mut comps = self.scalar_fields(grid)?;
        if comps.len() != 1 {
            return Err(FieldError::ComponentMismatch { expected: 1, got: comps.len() });
        }
        Ok(comps.remove(0))
    }

    pub fn into_vector<T: Real>(&self, grid: &Grid<T>) -> Result<VectorField<T>, FieldError> {
        VectorField::new(grid, self.scalar_fields(grid)?)
    }

    pub fn into_sym_tensor<T: Real>(&self, grid: &Grid<T>) -> Result<SymTensorField<T>, FieldError> {
        SymTensorField::new(grid, self.scalar_fields(grid)?)
    }
}

pub fn write_scalar<T: Real>(path: impl AsRef<Path>, f: &ScalarField<T>) -> Result<(), FieldError> {
    FieldFile::from_components(std::slice::from_ref(f)).write(path)
}

pub fn write_vector<T: Real>(path: impl AsRef<Path>, v: &VectorField<T>) -> Result<(), FieldError> {
    FieldFile::from_components(v.components()).write(path)
}

pub fn write_sym_tensor<T: Real>(path: impl AsRef<Path>, s: &SymTensorField<T>) -> Result<(), FieldError> {
    FieldFile::from_components(s.components()).write(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip() {
        let g = Grid::<f64>::new(3, 4).unwrap();
        let v = VectorField::from_fn(&g, |a, x| (a as f64 + 1.0) * x[0] - x[2] / 3.0);
        let file = FieldFile::from_components(v.components());
        let mut buf = Vec::new();
        file.to_writer(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"CFLD");
        assert_eq!(buf.len(), 20 + 8 * 3 * 64);
        let back = FieldFile::from_reader(&buf[..]).unwrap().into_vector(&g).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn rejects_truncated() {
        let g = Grid::<f64>::new(3, 4).unwrap();
        let mut buf = Vec::new();
        FieldFile::from_components(&[ScalarField::constant(&g, 1.0)]).to_writer(&mut buf).unwrap();
        buf.pop();
        assert!(matches!(FieldFile::from_reader(&buf[..]), Err(FieldError::Format(_))));
    }
}
