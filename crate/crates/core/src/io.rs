//! JSON schemas and canonical serialization.
//!
//! Complex entries are `[re, im]` pairs; matrices are arrays of rows. All
//! output goes through a canonical writer: object keys sorted, floats
//! printed with 17 significant digits in C `%g` style. Seventeen digits
//! round-trip IEEE doubles exactly, so `save(load(f))` is bit-identical for
//! canonical files and repeated runs with the same seed produce
//! byte-identical certificates.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::matlin::{C64, HermitianMatrix};
use crate::opsys::OperatorSystemSpace;
use crate::Result;

/// A complex matrix as rows of `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixJson(pub Vec<Vec<[f64; 2]>>);

impl MatrixJson {
    pub fn from_matrix(m: &DMatrix<C64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        MatrixJson(rows)
    }

    pub fn to_matrix(&self) -> Result<DMatrix<C64>> {
        let nrows = self.0.len();
        if nrows == 0 {
            return Err(Error::SchemaError {
                context: "matrix".into(),
                message: "matrix has no rows".into(),
            });
        }
        let ncols = self.0[0].len();
        for (i, row) in self.0.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::SchemaError {
                    context: "matrix".into(),
                    message: format!("row {i} has {} entries, expected {ncols}", row.len()),
                });
            }
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| C64::new(self.0[i][j][0], self.0[i][j][1])))
    }
}

/// Operator-system file: `{"dim": d, "basis": [matrix...], "unit": matrix}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpsysJson {
    pub dim: usize,
    pub basis: Vec<MatrixJson>,
    pub unit: MatrixJson,
}

/// Correlation file; `p[x][y][a][b]` with experiments/outcomes 1-based in
/// prose and positional (0-based) in the arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationJson {
    pub experiments: usize,
    pub outcomes: usize,
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
}

/// One party's projection-valued measures: `measurements[x][a]` is a matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PvmJson {
    pub dim: usize,
    pub measurements: Vec<Vec<MatrixJson>>,
}

/// Density-matrix state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateJson {
    pub dim: usize,
    pub rho: MatrixJson,
}

/// Generators of a non-signalling operator system: `generators[x][y][a][b]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NsSystemJson {
    pub dim: usize,
    pub experiments: usize,
    pub outcomes: usize,
    pub generators: Vec<Vec<Vec<Vec<MatrixJson>>>>,
}

/// Loads and validates an operator system.
pub fn load_opsys(path: &Path) -> Result<OperatorSystemSpace> {
    let text = std::fs::read_to_string(path)?;
    let parsed: OpsysJson = serde_json::from_str(&text).map_err(|e| Error::SchemaError {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    opsys_from_json(&parsed)
}

pub fn opsys_from_json(parsed: &OpsysJson) -> Result<OperatorSystemSpace> {
    let d = parsed.dim;
    let unit = parsed.unit.to_matrix()?;
    if unit.nrows() != d {
        return Err(Error::SchemaError {
            context: "unit".into(),
            message: format!("unit is {}x{}, expected {d}x{d}", unit.nrows(), unit.ncols()),
        });
    }
    if (&unit - DMatrix::<C64>::identity(d, d)).norm() > 1e-12 {
        return Err(Error::InvariantViolation {
            which: "unit must be the identity matrix".into(),
        });
    }
    let mut basis = Vec::with_capacity(parsed.basis.len());
    for (k, mj) in parsed.basis.iter().enumerate() {
        let m = mj.to_matrix()?;
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::SchemaError {
                context: format!("basis[{k}]"),
                message: format!("matrix is {}x{}, expected {d}x{d}", m.nrows(), m.ncols()),
            });
        }
        basis.push(HermitianMatrix::new(m).map_err(|_| Error::InvariantViolation {
            which: format!("basis[{k}] is not Hermitian within 1e-12"),
        })?);
    }
    OperatorSystemSpace::new(basis)
}

pub fn opsys_to_json(v: &OperatorSystemSpace) -> OpsysJson {
    OpsysJson {
        dim: v.ambient_dim(),
        basis: v.basis().iter().map(|b| MatrixJson::from_matrix(b.matrix())).collect(),
        unit: MatrixJson::from_matrix(v.unit().matrix()),
    }
}


/// Correlation tensor to its file form, `p[x][y][a][b]`.
pub fn correlation_to_json(c: &crate::correlations::Correlation) -> CorrelationJson {
    let n = c.experiments();
    let k = c.outcomes();
    let p = (0..n)
        .map(|x| {
            (0..n)
                .map(|y| (0..k).map(|a| (0..k).map(|b| c.get(a, b, x, y)).collect()).collect())
                .collect()
        })
        .collect();
    CorrelationJson { experiments: n, outcomes: k, p }
}

/// Parses and shape-checks a correlation file.
pub fn correlation_from_json(j: &CorrelationJson) -> Result<crate::correlations::Correlation> {
    let n = j.experiments;
    let k = j.outcomes;
    let mut values = Vec::with_capacity(n * n * k * k);
    if j.p.len() != n {
        return Err(Error::SchemaError {
            context: "correlation".into(),
            message: format!("expected {n} blocks for x, found {}", j.p.len()),
        });
    }
    for x in 0..n {
        if j.p[x].len() != n {
            return Err(Error::SchemaError {
                context: "correlation".into(),
                message: format!("expected {n} blocks for y at x={x}"),
            });
        }
        for y in 0..n {
            let tile = &j.p[x][y];
            if tile.len() != k || tile.iter().any(|row| row.len() != k) {
                return Err(Error::SchemaError {
                    context: "correlation".into(),
                    message: format!("expected a {k}x{k} tile at (x={x}, y={y})"),
                });
            }
            for a in 0..k {
                for b in 0..k {
                    values.push(tile[a][b]);
                }
            }
        }
    }
    crate::correlations::Correlation::new(n, k, values)
}

/// Formats a double with 17 significant digits, C `%.17g` style: `%e` form
/// for extreme exponents, `%f` form otherwise, trailing zeros trimmed.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        // JSON cannot carry these; the canonical writer rejects them earlier.
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    const P: i32 = 17;
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= P {
        let mantissa = trim_trailing_zeros(mantissa);
        format!("{mantissa}e{}{:02}", if exp < 0 { "-" } else { "+" }, exp.abs())
    } else {
        let decimals = (P - 1 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        trim_trailing_zeros(&fixed).to_string()
    }
}

fn trim_trailing_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

struct CanonicalFormatter {
    indent_level: usize,
    has_value: bool,
}

impl CanonicalFormatter {
    fn new() -> Self {
        Self { indent_level: 0, has_value: false }
    }

    fn newline<W: ?Sized + Write>(&self, writer: &mut W) -> std::io::Result<()> {
        writer.write_all(b"\n")?;
        for _ in 0..self.indent_level {
            writer.write_all(b"  ")?;
        }
        Ok(())
    }
}

impl serde_json::ser::Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(format_g17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.indent_level += 1;
        self.has_value = false;
        writer.write_all(b"[")
    }

    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.indent_level -= 1;
        if self.has_value {
            self.newline(writer)?;
        }
        writer.write_all(b"]")
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()> {
        if !first {
            writer.write_all(b",")?;
        }
        self.newline(writer)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, _writer: &mut W) -> std::io::Result<()> {
        self.has_value = true;
        Ok(())
    }

    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.indent_level += 1;
        self.has_value = false;
        writer.write_all(b"{")
    }

    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        self.indent_level -= 1;
        if self.has_value {
            self.newline(writer)?;
        }
        writer.write_all(b"}")
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()> {
        if !first {
            writer.write_all(b",")?;
        }
        self.newline(writer)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> std::io::Result<()> {
        writer.write_all(b": ")
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, _writer: &mut W) -> std::io::Result<()> {
        self.has_value = true;
        Ok(())
    }
}

/// Serializes to the canonical form: sorted keys, g17 floats, two-space
/// indentation, trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // Round-trip through Value; its object map is a BTreeMap, which sorts keys.
    let v = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CanonicalFormatter::new());
    v.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("JSON is UTF-8"))
}

/// Writes a value in canonical form.
pub fn save_canonical<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = canonical_json(value)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Loads any JSON value with schema-error context.
pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::SchemaError {
        context: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_formatting() {
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(0.5), "0.5");
        assert_eq!(format_g17(-2.25), "-2.25");
        assert_eq!(format_g17(1e-6), "9.9999999999999995e-07");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(1e20), "1e+20");
    }

    #[test]
    fn g17_round_trips_doubles() {
        let values = [
            0.1, -0.3, 1.0 / 3.0, 2f64.sqrt(), 1e-12, 123456789.123456789,
            0.85355339059327373, -1e-300, 4.9e-324,
        ];
        for &v in &values {
            let s = format_g17(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} -> {s}");
        }
    }

    #[test]
    fn canonical_round_trip() {
        let v = OperatorSystemSpace::full(2);
        let json = opsys_to_json(&v);
        let text = canonical_json(&json).unwrap();
        let parsed: OpsysJson = serde_json::from_str(&text).unwrap();
        let text2 = canonical_json(&parsed).unwrap();
        assert_eq!(text, text2);
        let v2 = opsys_from_json(&parsed).unwrap();
        assert_eq!(v2.basis_len(), v.basis_len());
    }

    #[test]
    fn canonical_sorts_keys() {
        #[derive(Serialize)]
        struct Unordered {
            zebra: f64,
            alpha: f64,
        }
        let text = canonical_json(&Unordered { zebra: 1.0, alpha: 2.0 }).unwrap();
        let a = text.find("alpha").unwrap();
        let z = text.find("zebra").unwrap();
        assert!(a < z);
    }

    #[test]
    fn scalar_system_loads_from_text() {
        let text = r#"{"dim":1,"basis":[[[[1,0]]]],"unit":[[[1,0]]]}"#;
        let parsed: OpsysJson = serde_json::from_str(text).unwrap();
        let v = opsys_from_json(&parsed).unwrap();
        assert_eq!(v.ambient_dim(), 1);
        assert_eq!(v.basis_len(), 1);
    }

    #[test]
    fn opsys_schema_errors() {
        let bad = OpsysJson {
            dim: 2,
            basis: vec![MatrixJson::from_matrix(&DMatrix::<C64>::identity(2, 2))],
            unit: MatrixJson::from_matrix(&(DMatrix::<C64>::identity(2, 2) * C64::new(2.0, 0.0))),
        };
        assert!(matches!(opsys_from_json(&bad), Err(Error::InvariantViolation { .. })));
    }

    #[test]
    fn matrix_json_round_trip() {
        let m = DMatrix::from_fn(2, 3, |i, j| C64::new(i as f64 + 0.5, j as f64 - 0.25));
        let mj = MatrixJson::from_matrix(&m);
        assert_eq!(mj.to_matrix().unwrap(), m);
    }
}
