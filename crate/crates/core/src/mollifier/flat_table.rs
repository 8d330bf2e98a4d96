//! Tabulated derivatives of the flat kernel.
//!
//! `psi^{(j)}(y) = (1/pi) int_0^2 chi(xi) xi^j Re(i^j e^{i y xi}) dxi` is
//! computed once on the nodes `y_n = n/8`, `0 <= y_n <= 640`, for
//! `j = 0..=28` together with the primitive `Psi`. Off-node values come from
//! a Taylor expansion about the nearest node. Beyond the table radius the
//! kernel is below `1e-17` and is treated as zero.

use super::kernel::flat_bump;
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::taylor::Taylor;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

pub const TABLE_STEP: f64 = 0.125;
pub const TABLE_RADIUS: f64 = 640.0;
pub const TABLE_ORDERS: usize = 29;
const TAYLOR_TERMS: usize = 11;
/// Highest derivative order available from the table.
pub const MAX_JET_ORDER: usize = TABLE_ORDERS - TAYLOR_TERMS;
const ROW: usize = TABLE_ORDERS + 1;

const MAGIC: &[u8; 8] = b"VWLKRN01";
const VERSION: u32 = 1;
pub const CACHE_ENV: &str = "VWLAB_KERNEL_CACHE";

pub struct FlatTable {
    step: f64,
    rows: Vec<[f64; ROW]>,
}

static GLOBAL: OnceLock<FlatTable> = OnceLock::new();

fn compute_row(y: f64, nodes: &[f64], weights: &[f64]) -> [f64; ROW] {
    let mut c = [0.0; TABLE_ORDERS];
    let mut s = [0.0; TABLE_ORDERS];
    let mut prim = 0.0;
    let per_unit = (y / PI).ceil() as usize;
    for (lo, panels) in [(0.0, 2 + per_unit), (1.0, 8 + per_unit)] {
        let w = 1.0 / panels as f64;
        for p in 0..panels {
            let a = lo + p as f64 * w;
            for (x, wt) in nodes.iter().zip(weights) {
                let xi = a + 0.5 * w * (x + 1.0);
                let chi = if lo == 0.0 { 1.0 } else { flat_bump(xi) };
                let base = 0.5 * w * wt * chi;
                if base == 0.0 {
                    continue;
                }
                let (sn, cs) = (y * xi).sin_cos();
                prim += base * sn / xi;
                let mut pw = base;
                for j in 0..TABLE_ORDERS {
                    c[j] += pw * cs;
                    s[j] += pw * sn;
                    pw *= xi;
                }
            }
        }
    }
    let mut row = [0.0; ROW];
    for j in 0..TABLE_ORDERS {
        row[j] = match j % 4 {
            0 => c[j],
            1 => -s[j],
            2 => -c[j],
            _ => s[j],
        } / PI;
    }
    row[TABLE_ORDERS] = 0.5 + prim / PI;
    row
}

impl FlatTable {
    pub fn compute() -> Self {
        let (nodes, weights) = gauss_legendre(16);
        let count = (TABLE_RADIUS / TABLE_STEP).round() as usize + 1;
        let rows = (0..count)
            .into_par_iter()
            .map(|n| compute_row(n as f64 * TABLE_STEP, &nodes, &weights))
            .collect();
        FlatTable {
            step: TABLE_STEP,
            rows,
        }
    }

    /// Process-wide table, loaded from the file named by `VWLAB_KERNEL_CACHE`
    /// when present and valid, computed (and written there) otherwise.
    pub fn global() -> Result<&'static FlatTable> {
        Ok(GLOBAL.get_or_init(|| match std::env::var_os(CACHE_ENV) {
            Some(p) => {
                let path = PathBuf::from(p);
                match FlatTable::read(&path) {
                    Ok(t) => t,
                    Err(_) => {
                        let t = FlatTable::compute();
                        let _ = t.write(&path);
                        t
                    }
                }
            }
            None => FlatTable::compute(),
        }))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn radius(&self) -> f64 {
        self.step * (self.rows.len() - 1) as f64
    }

    /// Writes the table: magic, version, step, row count, order count, then
    /// the rows as little-endian f64.
    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        {
            let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            f.write_all(MAGIC)?;
            f.write_all(&VERSION.to_le_bytes())?;
            f.write_all(&self.step.to_le_bytes())?;
            f.write_all(&(self.rows.len() as u64).to_le_bytes())?;
            f.write_all(&(ROW as u32).to_le_bytes())?;
            for row in &self.rows {
                for v in row {
                    f.write_all(&v.to_le_bytes())?;
                }
            }
            f.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::KernelTable {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 32 || &bytes[..8] != MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(8);
        let step = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let count = u64::from_le_bytes(bytes[20..28].try_into().unwrap()) as usize;
        let width = u32_at(28) as usize;
        if version != VERSION || width != ROW || step != TABLE_STEP {
            return Err(bad("incompatible header"));
        }
        if count != (TABLE_RADIUS / TABLE_STEP).round() as usize + 1
            || bytes.len() != 32 + count * ROW * 8
        {
            return Err(bad("truncated payload"));
        }
        let mut rows = Vec::with_capacity(count);
        for r in 0..count {
            let mut row = [0.0; ROW];
            for (k, v) in row.iter_mut().enumerate() {
                let o = 32 + (r * ROW + k) * 8;
                *v = f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
            }
            rows.push(row);
        }
        Ok(FlatTable { step, rows })
    }

    fn locate(&self, ay: f64) -> Option<(usize, f64)> {
        let n = (ay / self.step).round() as usize;
        if n >= self.rows.len() {
            None
        } else {
            Some((n, ay - n as f64 * self.step))
        }
    }

    /// Derivatives `psi^{(j)}(y)` for `j = 0..=order` as a jet.
    pub fn psi_jet(&self, y: f64, order: usize) -> Result<Taylor> {
        if order > MAX_JET_ORDER {
            return Err(Error::DerivativeOrder {
                requested: order,
                max: MAX_JET_ORDER,
            });
        }
        let mut d = vec![Complex64::new(0.0, 0.0); order + 1];
        if let Some((n, delta)) = self.locate(y.abs()) {
            let row = &self.rows[n];
            for (j, dj) in d.iter_mut().enumerate() {
                let mut acc = 0.0;
                let mut p = 1.0;
                for i in 0..TAYLOR_TERMS {
                    acc += row[j + i] * p;
                    p *= delta / (i + 1) as f64;
                }
                let sign = if y < 0.0 && j % 2 == 1 { -1.0 } else { 1.0 };
                *dj = Complex64::new(sign * acc, 0.0);
            }
        }
        Ok(Taylor::from_derivatives(&d))
    }

    /// Jet of the primitive `Psi(y)`.
    pub fn primitive_jet(&self, y: f64, order: usize) -> Result<Taylor> {
        let mut out = if order > 0 {
            let inner = self.psi_jet(y, order - 1)?;
            let mut c = vec![Complex64::new(0.0, 0.0); order + 1];
            for (j, v) in inner.0.iter().enumerate() {
                c[j + 1] = v / (j + 1) as f64;
            }
            Taylor(c)
        } else {
            Taylor::zero(0)
        };
        let ay = y.abs();
        let value = match self.locate(ay) {
            Some((n, delta)) => {
                let row = &self.rows[n];
                let mut acc = row[TABLE_ORDERS];
                let mut p = 1.0;
                for i in 0..TAYLOR_TERMS {
                    p *= delta / (i + 1) as f64;
                    acc += row[i] * p;
                }
                acc
            }
            None => 1.0,
        };
        out.0[0] = Complex64::new(if y < 0.0 { 1.0 - value } else { value }, 0.0);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from an independent adaptive quadrature of the
    // defining Fourier integral.
    const REFERENCE: [(f64, f64); 8] = [
        (0.0, 0.477464829275686),
        (1.0, 0.3132597025213682),
        (5.0, 0.041909829804281554),
        (10.0, 0.0033806884075826766),
        (20.0, 0.0006464522652417403),
        (40.0, -1.7297073865704407e-06),
        (80.0, -1.8156e-07),
        (160.0, 1.076e-09),
    ];

    #[test]
    fn matches_reference_values() {
        let t = FlatTable::global().unwrap();
        for (y, v) in REFERENCE {
            let got = t.psi_jet(y, 0).unwrap().value().re;
            let tol = if y < 60.0 { 1e-13 } else { 1e-3 * v.abs() };
            assert!((got - v).abs() < tol, "psi({y}) = {got}, expected {v}");
        }
    }

    #[test]
    fn off_node_evaluation_is_consistent_with_derivatives() {
        let t = FlatTable::global().unwrap();
        let h = 1e-5;
        for y in [0.0613, 2.31, -7.77, 33.3] {
            let j = t.psi_jet(y, 2).unwrap();
            let fd = (t.psi_jet(y + h, 0).unwrap().value() - t.psi_jet(y - h, 0).unwrap().value())
                / (2.0 * h);
            assert!((j.derivative(1) - fd).norm() < 1e-9, "y={y}");
            let p = t.primitive_jet(y, 1).unwrap();
            let fdp = (t.primitive_jet(y + h, 0).unwrap().value()
                - t.primitive_jet(y - h, 0).unwrap().value())
                / (2.0 * h);
            assert!((p.derivative(1) - fdp).norm() < 1e-9);
            assert!((p.derivative(1) - j.value()).norm() < 1e-15);
        }
    }

    #[test]
    fn primitive_limits() {
        let t = FlatTable::global().unwrap();
        assert!((t.primitive_jet(0.0, 0).unwrap().value().re - 0.5).abs() < 1e-15);
        assert!((t.primitive_jet(639.0, 0).unwrap().value().re - 1.0).abs() < 1e-14);
        assert!(t.primitive_jet(-639.0, 0).unwrap().value().re.abs() < 1e-14);
    }

    #[test]
    fn derivative_order_guard() {
        let t = FlatTable::global().unwrap();
        assert!(matches!(
            t.psi_jet(0.0, MAX_JET_ORDER + 1),
            Err(Error::DerivativeOrder { .. })
        ));
    }

    #[test]
    fn cache_round_trip() {
        let t = FlatTable::global().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kernel.bin");
        t.write(&path).unwrap();
        let back = FlatTable::read(&path).unwrap();
        assert_eq!(back.len(), t.len());
        assert_eq!(back.rows[100], t.rows[100]);
        std::fs::write(&path, b"garbage").unwrap();
        assert!(FlatTable::read(&path).is_err());
    }
}
