//! On-disk formats.
//!
//! Binary payloads are little-endian with a four-byte magic and a `u32`
//! version:
//!
//! * panel `FPNL`: `u64 n, p, r`, basis, then `n·p·r` coefficients `f64`
//!   in `(t, j, l)` order;
//! * spectral density `FSPC`: `u64 p, r, K`, `u8` lag-window kernel,
//!   `i64` truncation lag (`−1` when absent), basis, `K` frequencies, then
//!   for each frequency the `pr × pr` coefficient matrix as `(re, im)` pairs
//!   in row-major order;
//! * observations `FOBS`: `u64 n, p`, `p` noise standard deviations, `u8`
//!   seed flag and `u64` seed, then per curve `(t, j)` a `u64` count
//!   followed by the sampling points and the values.
//!
//! A basis is stored as a `u8` tag (`0` Fourier, `1` tabulated); a
//! tabulated basis follows with `u64 G`, nodes, weights and the `G × r`
//! values.
//!
//! Text formats: panels as CSV `t,j,l,coef` (Fourier basis implied),
//! observations as CSV `t,j,i,u,y`, supports as CSV `j,k`, everything else
//! as JSON.

use std::fs;
use std::io::Write;
use std::path::Path;

use hdfts_core::basis::{BasisKind, BasisSpec};
use hdfts_core::curves::{ComplexKernelMatrix, FunctionalPanel};
use hdfts_core::linalg::{CMatrix, RMatrix};
use hdfts_core::secondorder::{LagWindowKernel, SpectralDensity};
use hdfts_core::smoothing::{DiscreteObservations, ObservedCurve};
use hdfts_core::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;
const PANEL_MAGIC: &[u8; 4] = b"FPNL";
const SPECTRAL_MAGIC: &[u8; 4] = b"FSPC";
const OBS_MAGIC: &[u8; 4] = b"FOBS";

#[derive(Default)]
struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn header(magic: &[u8; 4]) -> Self {
        let mut e = Self::default();
        e.buf.extend_from_slice(magic);
        e.u32(FORMAT_VERSION);
        e
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn basis(&mut self, basis: &BasisSpec) {
        match basis.kind() {
            BasisKind::Fourier => self.u8(0),
            BasisKind::UserGrid { nodes, weights, values } => {
                self.u8(1);
                self.u64(nodes.len() as u64);
                self.f64s(nodes);
                self.f64s(weights);
                self.f64s(values.as_slice());
            }
        }
    }
}

struct Decoder<'a> {
    what: &'static str,
    data: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn open(what: &'static str, data: &'a [u8], magic: &[u8; 4]) -> CliResult<Self> {
        let mut d = Self { what, data, pos: 0 };
        if d.take(4)? != magic {
            return Err(CliError::format(what, "bad magic bytes"));
        }
        let version = d.u32()?;
        if version != FORMAT_VERSION {
            return Err(CliError::format(what, format!("unsupported version {version}")));
        }
        Ok(d)
    }
    fn take(&mut self, len: usize) -> CliResult<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| CliError::format(self.what, "unexpected end of file"))?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> CliResult<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> CliResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> CliResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn i64(&mut self) -> CliResult<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self) -> CliResult<usize> {
        usize::try_from(self.u64()?).map_err(|_| CliError::format(self.what, "length overflows usize"))
    }
    fn f64s(&mut self, len: usize) -> CliResult<Vec<f64>> {
        let bytes = len.checked_mul(8).ok_or_else(|| CliError::format(self.what, "length overflow"))?;
        Ok(self.take(bytes)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
    fn basis(&mut self, r: usize) -> CliResult<BasisSpec> {
        match self.u8()? {
            0 => Ok(BasisSpec::fourier(r)?),
            1 => {
                let g = self.usize()?;
                let nodes = self.f64s(g)?;
                let weights = self.f64s(g)?;
                let values = RMatrix::from_vec(g, r, self.f64s(g * r)?)?;
                Ok(BasisSpec::user_grid(nodes, weights, values)?)
            }
            tag => Err(CliError::format(self.what, format!("unknown basis tag {tag}"))),
        }
    }
    fn finish(self) -> CliResult<()> {
        if self.pos != self.data.len() {
            return Err(CliError::format(self.what, "trailing bytes"));
        }
        Ok(())
    }
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn encode_panel(panel: &FunctionalPanel) -> Vec<u8> {
    let mut e = Encoder::header(PANEL_MAGIC);
    e.u64(panel.n() as u64);
    e.u64(panel.p() as u64);
    e.u64(panel.r() as u64);
    e.basis(panel.basis());
    e.f64s(panel.coeffs());
    e.buf
}

pub fn decode_panel(data: &[u8]) -> CliResult<FunctionalPanel> {
    let mut d = Decoder::open("panel", data, PANEL_MAGIC)?;
    let (n, p, r) = (d.usize()?, d.usize()?, d.usize()?);
    let basis = d.basis(r)?;
    let len = n.checked_mul(p).and_then(|v| v.checked_mul(r)).ok_or_else(|| CliError::format("panel", "size overflow"))?;
    let coeffs = d.f64s(len)?;
    d.finish()?;
    Ok(FunctionalPanel::new(n, p, basis, coeffs)?)
}

pub fn write_panel_csv(path: &Path, panel: &FunctionalPanel) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "j", "l", "coef"])?;
    for t in 0..panel.n() {
        for j in 0..panel.p() {
            for (l, c) in panel.curve(t, j).iter().enumerate() {
                w.write_record([t.to_string(), j.to_string(), l.to_string(), format!("{c:e}")])?;
            }
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn read_panel_csv(path: &Path) -> CliResult<FunctionalPanel> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows: Vec<(usize, usize, usize, f64)> = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec?);
    }
    if rows.is_empty() {
        return Err(CliError::format("panel csv", "no rows"));
    }
    let n = rows.iter().map(|r| r.0).max().unwrap_or(0) + 1;
    let p = rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
    let r = rows.iter().map(|r| r.2).max().unwrap_or(0) + 1;
    if rows.len() != n * p * r {
        return Err(CliError::format("panel csv", format!("{} rows for an {n} × {p} × {r} panel", rows.len())));
    }
    let mut coeffs = vec![f64::NAN; n * p * r];
    for (t, j, l, c) in rows {
        coeffs[(t * p + j) * r + l] = c;
    }
    if coeffs.iter().any(|c| c.is_nan()) {
        return Err(CliError::format("panel csv", "missing or duplicate (t, j, l) rows"));
    }
    Ok(FunctionalPanel::new(n, p, BasisSpec::fourier(r)?, coeffs)?)
}

/// Panel from `.csv` or the binary format.
pub fn load_panel(path: &Path) -> CliResult<FunctionalPanel> {
    if is_csv(path) {
        read_panel_csv(path)
    } else {
        decode_panel(&read_bytes(path)?)
    }
}

pub fn save_panel(path: &Path, panel: &FunctionalPanel) -> CliResult<()> {
    if is_csv(path) {
        write_panel_csv(path, panel)
    } else {
        write_bytes(path, &encode_panel(panel))
    }
}

fn kernel_tag(k: LagWindowKernel) -> u8 {
    match k {
        LagWindowKernel::Rectangular => 0,
        LagWindowKernel::Bartlett => 1,
        LagWindowKernel::Parzen => 2,
        LagWindowKernel::FlatTop => 3,
    }
}

pub fn encode_spectral(spec: &SpectralDensity) -> Vec<u8> {
    let mut e = Encoder::header(SPECTRAL_MAGIC);
    e.u64(spec.p() as u64);
    e.u64(spec.r() as u64);
    e.u64(spec.len() as u64);
    e.u8(kernel_tag(spec.kernel));
    e.i64(spec.m0.map_or(-1, |m| m as i64));
    e.basis(&spec.basis);
    e.f64s(&spec.theta_grid);
    for v in &spec.values {
        for z in v.as_matrix().as_slice() {
            e.f64s(&[z.re, z.im]);
        }
    }
    e.buf
}

pub fn decode_spectral(data: &[u8]) -> CliResult<SpectralDensity> {
    let mut d = Decoder::open("spectral density", data, SPECTRAL_MAGIC)?;
    let (p, r, k) = (d.usize()?, d.usize()?, d.usize()?);
    let kernel = match d.u8()? {
        0 => LagWindowKernel::Rectangular,
        1 => LagWindowKernel::Bartlett,
        2 => LagWindowKernel::Parzen,
        3 => LagWindowKernel::FlatTop,
        t => return Err(CliError::format("spectral density", format!("unknown kernel tag {t}"))),
    };
    let m0 = match d.i64()? {
        -1 => None,
        m if m >= 0 => Some(m as usize),
        m => return Err(CliError::format("spectral density", format!("bad truncation lag {m}"))),
    };
    let basis = d.basis(r)?;
    let grid = d.f64s(k)?;
    let side = p * r;
    let mut values = Vec::with_capacity(k);
    for _ in 0..k {
        let raw = d.f64s(2 * side * side)?;
        let entries = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        values.push(ComplexKernelMatrix::from_block_matrix(p, r, CMatrix::from_vec(side, side, entries)?)?);
    }
    d.finish()?;
    Ok(SpectralDensity::new(grid, values, m0, kernel, basis)?)
}

/// Spectral density from `.json` or the binary format.
pub fn load_spectral(path: &Path) -> CliResult<SpectralDensity> {
    if is_json(path) {
        read_json(path)
    } else {
        decode_spectral(&read_bytes(path)?)
    }
}

pub fn save_spectral(path: &Path, spec: &SpectralDensity) -> CliResult<()> {
    if is_json(path) {
        write_json(path, spec)
    } else {
        write_bytes(path, &encode_spectral(spec))
    }
}

pub fn encode_observations(obs: &DiscreteObservations) -> Vec<u8> {
    let mut e = Encoder::header(OBS_MAGIC);
    e.u64(obs.n as u64);
    e.u64(obs.p as u64);
    e.f64s(&obs.noise_sd);
    e.u8(obs.seed.is_some() as u8);
    e.u64(obs.seed.unwrap_or(0));
    for c in &obs.curves {
        e.u64(c.len() as u64);
        e.f64s(&c.u);
        e.f64s(&c.y);
    }
    e.buf
}

pub fn decode_observations(data: &[u8]) -> CliResult<DiscreteObservations> {
    let mut d = Decoder::open("observations", data, OBS_MAGIC)?;
    let (n, p) = (d.usize()?, d.usize()?);
    let noise_sd = d.f64s(p)?;
    let has_seed = d.u8()? != 0;
    let seed = d.u64()?;
    let mut curves = Vec::with_capacity(n * p);
    for _ in 0..n * p {
        let len = d.usize()?;
        let u = d.f64s(len)?;
        let y = d.f64s(len)?;
        curves.push(ObservedCurve::new(u, y)?);
    }
    d.finish()?;
    Ok(DiscreteObservations::new(n, p, curves, noise_sd, has_seed.then_some(seed))?)
}

pub fn write_observations_csv(path: &Path, obs: &DiscreteObservations) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "j", "i", "u", "y"])?;
    for t in 0..obs.n {
        for j in 0..obs.p {
            let c = obs.curve(t, j);
            for (i, (u, y)) in c.u.iter().zip(&c.y).enumerate() {
                w.write_record([t.to_string(), j.to_string(), i.to_string(), format!("{u:e}"), format!("{y:e}")])?;
            }
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Observations from CSV. The noise level and seed are not part of the CSV
/// layout; they are read back as NaN and `None`.
pub fn read_observations_csv(path: &Path) -> CliResult<DiscreteObservations> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows: Vec<(usize, usize, usize, f64, f64)> = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec?);
    }
    if rows.is_empty() {
        return Err(CliError::format("observations csv", "no rows"));
    }
    let n = rows.iter().map(|r| r.0).max().unwrap_or(0) + 1;
    let p = rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
    let mut buckets: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); n * p];
    for (t, j, _, u, y) in rows {
        let b = &mut buckets[t * p + j];
        b.0.push(u);
        b.1.push(y);
    }
    let curves = buckets
        .into_iter()
        .map(|(u, y)| ObservedCurve::new(u, y))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DiscreteObservations::new(n, p, curves, vec![f64::NAN; p], None)?)
}

pub fn load_observations(path: &Path) -> CliResult<DiscreteObservations> {
    if is_csv(path) {
        read_observations_csv(path)
    } else {
        decode_observations(&read_bytes(path)?)
    }
}

pub fn save_observations(path: &Path, obs: &DiscreteObservations) -> CliResult<()> {
    if is_csv(path) {
        write_observations_csv(path, obs)
    } else {
        write_bytes(path, &encode_observations(obs))
    }
}

/// Support as a CSV adjacency list `j,k`.
pub fn write_support_csv(path: &Path, pairs: &[(usize, usize)]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["j", "k"])?;
    for (j, k) in pairs {
        w.write_record([j.to_string(), k.to_string()])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn read_support_csv(path: &Path) -> CliResult<Vec<(usize, usize)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    Ok(serde_json::from_slice(&read_bytes(path)?)?)
}
