//! Binary field dumps and CSV time series.
//!
//! A field dump is `"QHDF"`, format version `u32 = 1`, `u32 d`, `u32 N`, `f64 time`,
//! `f64 hbar`, `f64 delta`, then `N^d` complex samples as interleaved little-endian `f64`
//! pairs, row-major with axis 1 fastest. A hydrodynamic dump shares the header and follows
//! it with tagged blocks: one role byte, a `u32` component count `c`, then `c * N^d`
//! complex samples (real fields carry a zero imaginary part).

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{QhdError, Result};
use crate::grid::{ComplexField, ScalarField, TorusGrid, VectorField};
use crate::log_nls::{EnergyBreakdown, WaveState};
use crate::madelung::HydroState;
use crate::thermo::ThermoParams;

pub const MAGIC: &[u8; 4] = b"QHDF";
pub const FORMAT_VERSION: u32 = 1;

/// Role byte of a block in a hydrodynamic dump.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum FieldRole {
    Rho = 1,
    SqrtRho = 2,
    Current = 3,
    Momentum = 4,
    GradSqrtRho = 5,
    Polar = 6,
}

impl FieldRole {
    pub const ALL: [FieldRole; 6] = [
        FieldRole::Rho,
        FieldRole::SqrtRho,
        FieldRole::Current,
        FieldRole::Momentum,
        FieldRole::GradSqrtRho,
        FieldRole::Polar,
    ];

    pub fn from_tag(tag: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| *r as u8 == tag)
            .ok_or_else(|| QhdError::Format(format!("unknown field role tag {tag}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DumpHeader {
    pub dim: usize,
    pub n: usize,
    pub time: f64,
    pub hbar: f64,
    pub delta: f64,
}

impl DumpHeader {
    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.dim, self.n)
    }
}

fn write_header(w: &mut impl Write, h: &DumpHeader) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(h.dim as u32).to_le_bytes())?;
    w.write_all(&(h.n as u32).to_le_bytes())?;
    for v in [h.time, h.hbar, h.delta] {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_header(r: &mut impl Read) -> Result<DumpHeader> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(QhdError::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(QhdError::Format(format!("unsupported format version {version}")));
    }
    let dim = read_u32(r)? as usize;
    let n = read_u32(r)? as usize;
    let header = DumpHeader { dim, n, time: read_f64(r)?, hbar: read_f64(r)?, delta: read_f64(r)? };
    header.grid()?;
    Ok(header)
}

fn write_samples(w: &mut impl Write, values: impl Iterator<Item = Complex64>) -> Result<()> {
    for z in values {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_samples(r: &mut impl Read, len: usize) -> Result<Vec<Complex64>> {
    let mut buf = vec![0u8; 16 * len];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect())
}

/// Writes `state` as a field dump.
pub fn write_field(w: &mut impl Write, state: &WaveState) -> Result<()> {
    let grid = state.grid();
    let header = DumpHeader {
        dim: grid.dim(),
        n: grid.n(),
        time: state.time,
        hbar: state.params.hbar,
        delta: state.params.delta,
    };
    write_header(w, &header)?;
    write_samples(w, state.psi.values().iter().copied())
}

/// Reads a field dump.
pub fn read_field(r: &mut impl Read) -> Result<(DumpHeader, ComplexField)> {
    let header = read_header(r)?;
    let grid = header.grid()?;
    let values = read_samples(r, grid.len())?;
    Ok((header, ComplexField::new(grid, values)?))
}

/// Reads a field dump back into a state.
pub fn read_wave_state(r: &mut impl Read) -> Result<WaveState> {
    let (h, psi) = read_field(r)?;
    WaveState::new(psi, h.time, ThermoParams::new(h.delta, h.hbar)?)
}

fn write_block(w: &mut impl Write, role: FieldRole, comps: &[&[f64]]) -> Result<()> {
    w.write_all(&[role as u8])?;
    w.write_all(&(comps.len() as u32).to_le_bytes())?;
    for c in comps {
        write_samples(w, c.iter().map(|&v| Complex64::new(v, 0.0)))?;
    }
    Ok(())
}

fn vector_comps(v: &VectorField) -> Vec<&[f64]> {
    v.components().iter().map(Vec::as_slice).collect()
}

/// Writes all six hydrodynamic fields.
pub fn write_hydro(w: &mut impl Write, hydro: &HydroState, delta: f64) -> Result<()> {
    let grid = hydro.rho.grid();
    let header = DumpHeader { dim: grid.dim(), n: grid.n(), time: hydro.time, hbar: hydro.hbar, delta };
    write_header(w, &header)?;
    write_block(w, FieldRole::Rho, &[hydro.rho.values()])?;
    write_block(w, FieldRole::SqrtRho, &[hydro.sqrt_rho.values()])?;
    write_block(w, FieldRole::Current, &vector_comps(&hydro.current))?;
    write_block(w, FieldRole::Momentum, &vector_comps(&hydro.momentum))?;
    write_block(w, FieldRole::GradSqrtRho, &vector_comps(&hydro.grad_sqrt_rho))?;
    w.write_all(&[FieldRole::Polar as u8])?;
    w.write_all(&1u32.to_le_bytes())?;
    write_samples(w, hydro.polar.values().iter().copied())
}

/// One block of a hydrodynamic dump.
#[derive(Clone, Debug, PartialEq)]
pub struct HydroBlock {
    pub role: FieldRole,
    pub components: Vec<Vec<Complex64>>,
}

/// Reads a hydrodynamic dump as raw tagged blocks.
pub fn read_hydro(r: &mut impl Read) -> Result<(DumpHeader, Vec<HydroBlock>)> {
    let header = read_header(r)?;
    let len = header.grid()?.len();
    let mut blocks = Vec::new();
    loop {
        let mut tag = [0u8; 1];
        match r.read(&mut tag)? {
            0 => break,
            _ => {
                let role = FieldRole::from_tag(tag[0])?;
                let count = read_u32(r)? as usize;
                if count == 0 || count > 3 {
                    return Err(QhdError::Format(format!("block {role:?} has {count} components")));
                }
                let components = (0..count).map(|_| read_samples(r, len)).collect::<Result<_>>()?;
                blocks.push(HydroBlock { role, components });
            }
        }
    }
    Ok((header, blocks))
}

impl HydroBlock {
    /// Real parts of a single-component block.
    pub fn scalar(&self, grid: &TorusGrid) -> Result<ScalarField> {
        ScalarField::new(grid.clone(), self.components[0].iter().map(|z| z.re).collect())
    }

    /// Real parts of every component.
    pub fn vector(&self, grid: &TorusGrid) -> Result<VectorField> {
        VectorField::new(
            grid.clone(),
            self.components.iter().map(|c| c.iter().map(|z| z.re).collect()).collect(),
        )
    }
}

/// `f64` with 17 significant digits, round-trip exact.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub const SERIES_HEADER: &str =
    "time,mass,energy_total,energy_kinetic,energy_internal,hydro_grad,hydro_lambda,min_rho,max_rho";

/// `(min, max)` of `|psi|^2`.
pub fn density_range(psi: &ComplexField) -> (f64, f64) {
    psi.values()
        .iter()
        .map(|z| z.norm_sqr())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)))
}

/// One row of the time-series CSV.
pub fn series_row(time: f64, e: &EnergyBreakdown, min_rho: f64, max_rho: f64) -> String {
    [time, e.mass, e.total, e.kinetic, e.internal, e.hydro_grad, e.hydro_lambda, min_rho, max_rho]
        .map(fmt_f64)
        .join(",")
}

/// Row for a state and its energy split.
pub fn state_series_row(state: &WaveState, e: &EnergyBreakdown) -> String {
    let (lo, hi) = density_range(&state.psi);
    series_row(state.time, e, lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::random_band_limited;
    use crate::madelung::observables_default;

    fn state() -> WaveState {
        let grid = TorusGrid::new(2, 8).unwrap();
        let psi = random_band_limited(&grid, 4, 2, 1.0).unwrap();
        WaveState::new(psi, 0.375, ThermoParams::new(0.05, 0.7).unwrap()).unwrap()
    }

    #[test]
    fn field_roundtrip_is_exact() {
        let s = state();
        let mut buf = Vec::new();
        write_field(&mut buf, &s).unwrap();
        assert_eq!(buf.len(), 4 + 12 + 24 + 16 * 64);
        assert_eq!(&buf[..4], b"QHDF");
        let back = read_wave_state(&mut buf.as_slice()).unwrap();
        assert_eq!(back.psi.values(), s.psi.values());
        assert_eq!((back.time, back.params), (s.time, s.params));
    }

    #[test]
    fn sample_order_is_axis_one_fastest() {
        let grid = TorusGrid::new(2, 4).unwrap();
        let psi = grid.sample_complex(|x| Complex64::new(x[0], x[1]));
        let s = WaveState::new(psi, 0.0, ThermoParams::new(0.1, 1.0).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &s).unwrap();
        let samples = read_samples(&mut &buf[40..], 16).unwrap();
        // axis 1 (x[0]) varies fastest
        assert_eq!(samples[1], Complex64::new(0.25, 0.0));
        assert_eq!(samples[4], Complex64::new(0.0, 0.25));
    }

    #[test]
    fn rejects_corrupt_input() {
        let s = state();
        let mut buf = Vec::new();
        write_field(&mut buf, &s).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_field(&mut bad.as_slice()), Err(QhdError::Format(_))));
        let mut bad = buf.clone();
        bad[4] = 2;
        assert!(matches!(read_field(&mut bad.as_slice()), Err(QhdError::Format(_))));
        assert!(matches!(read_field(&mut &buf[..100]), Err(QhdError::Io(_))));
    }

    #[test]
    fn hydro_roundtrip() {
        let s = state();
        let h = observables_default(&s);
        let mut buf = Vec::new();
        write_hydro(&mut buf, &h, 0.05).unwrap();
        let (header, blocks) = read_hydro(&mut buf.as_slice()).unwrap();
        let grid = header.grid().unwrap();
        let roles: Vec<u8> = blocks.iter().map(|b| b.role as u8).collect();
        assert_eq!(roles, [1, 2, 3, 4, 5, 6]);
        assert_eq!(blocks[0].scalar(&grid).unwrap(), h.rho);
        assert_eq!(blocks[3].vector(&grid).unwrap(), h.momentum);
        assert_eq!(blocks[5].components[0], h.polar.values());
        assert_eq!(header.delta, 0.05);
    }

    #[test]
    fn series_row_roundtrips() {
        let s = state();
        let e = crate::log_nls::energy(&s);
        let row = state_series_row(&s, &e);
        let vals: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals.len(), SERIES_HEADER.split(',').count());
        assert_eq!(vals[0], 0.375);
        assert_eq!(vals[2], e.total);
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
