//! Tabulated optical constants.
//!
//! A [`MaterialTable`] holds `(wavelength, n, k)` samples for one material and
//! returns the complex refractive index `N = n - i·k` at any wavelength inside
//! the tabulated range by linear interpolation of `n` and `k` separately. There
//! is deliberately no extrapolation: asking for a wavelength outside the table is
//! an [`Error::OutOfRange`].
//!
//! Tables are read from a small CSV dialect:
//!
//! ```text
//! wavelength_nm,n,k
//! # comment lines are skipped
//! 400,1.5,0
//! 700,1.5,0
//! ```
//!
//! The header may also be `wavelength_um,n,k`, in which case wavelengths are
//! converted to nanometres on ingestion. All wavelengths inside the crate are nm.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HEADER_NM: &str = "wavelength_nm,n,k";
pub const HEADER_UM: &str = "wavelength_um,n,k";

/// One tabulated point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub wavelength_nm: f64,
    pub n: f64,
    pub k: f64,
}

impl Sample {
    pub fn new(wavelength_nm: f64, n: f64, k: f64) -> Self {
        Self { wavelength_nm, n, k }
    }
}

/// Optical constants of a single material versus wavelength.
///
/// Immutable after construction; samples are strictly increasing in
/// wavelength, there are at least two of them and `n, k >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialTable {
    name: String,
    samples: Vec<Sample>,
}

impl MaterialTable {
    /// Builds a table from unordered samples. Samples are sorted by wavelength
    /// and then validated.
    pub fn new(name: impl Into<String>, mut samples: Vec<Sample>) -> Result<Self> {
        let name = name.into();
        if samples.len() < 2 {
            return Err(Error::Validation(format!(
                "material '{name}' needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        for s in &samples {
            if !(s.wavelength_nm.is_finite() && s.n.is_finite() && s.k.is_finite()) {
                return Err(Error::Validation(format!(
                    "material '{name}': non-finite value at {} nm",
                    s.wavelength_nm
                )));
            }
            if s.wavelength_nm <= 0.0 {
                return Err(Error::Validation(format!(
                    "material '{name}': wavelength must be positive, got {}",
                    s.wavelength_nm
                )));
            }
            if s.n < 0.0 || s.k < 0.0 {
                return Err(Error::Validation(format!(
                    "material '{name}': negative optical constant at {} nm (n = {}, k = {})",
                    s.wavelength_nm, s.n, s.k
                )));
            }
        }
        samples.sort_by(|a, b| a.wavelength_nm.total_cmp(&b.wavelength_nm));
        if let Some(w) = samples.windows(2).find(|w| w[0].wavelength_nm >= w[1].wavelength_nm) {
            return Err(Error::Validation(format!(
                "material '{name}': duplicate wavelength {} nm",
                w[1].wavelength_nm
            )));
        }
        Ok(Self { name, samples })
    }

    /// A dispersionless material with the given `n`, `k` over `[min_nm, max_nm]`.
    pub fn constant(name: impl Into<String>, n: f64, k: f64, min_nm: f64, max_nm: f64) -> Result<Self> {
        Self::new(name, vec![Sample::new(min_nm, n, k), Sample::new(max_nm, n, k)])
    }

    /// Vacuum / air, `N = 1`, over an effectively unlimited range.
    pub fn air() -> Self {
        Self::constant("air", 1.0, 0.0, 1.0e-3, 1.0e9).expect("static table is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Tabulated wavelength range `(first, last)` in nm.
    pub fn range(&self) -> (f64, f64) {
        (
            self.samples[0].wavelength_nm,
            self.samples[self.samples.len() - 1].wavelength_nm,
        )
    }

    pub fn covers(&self, min_nm: f64, max_nm: f64) -> bool {
        let (lo, hi) = self.range();
        lo <= min_nm && max_nm <= hi
    }

    /// Complex index `n - i·k` at `wavelength_nm`.
    pub fn index_at(&self, wavelength_nm: f64) -> Result<Complex64> {
        let (lo, hi) = self.range();
        if !(wavelength_nm >= lo && wavelength_nm <= hi) {
            return Err(Error::OutOfRange {
                material: self.name.clone(),
                wavelength_nm,
                min_nm: lo,
                max_nm: hi,
            });
        }
        let upper = match self
            .samples
            .binary_search_by(|s| s.wavelength_nm.total_cmp(&wavelength_nm))
        {
            Ok(i) => {
                let s = self.samples[i];
                return Ok(Complex64::new(s.n, -s.k));
            }
            Err(i) => i,
        };
        let a = self.samples[upper - 1];
        let b = self.samples[upper];
        let t = (wavelength_nm - a.wavelength_nm) / (b.wavelength_nm - a.wavelength_nm);
        Ok(Complex64::new(lerp(a.n, b.n, t), -lerp(a.k, b.k, t)))
    }

    /// Serializes back to the CSV dialect (nm header). Values use the shortest
    /// representation that round-trips, so reloading is bit-exact.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.samples.len() + 1));
        out.push_str(HEADER_NM);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{}", s.wavelength_nm, s.n, s.k);
        }
        out
    }
}

// Clamped so interpolated values never leave the bracketing interval.
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    let v = a + (b - a) * t;
    v.clamp(a.min(b), a.max(b))
}

/// Reads a material table in the CSV dialect from any byte stream.
pub fn load_material_table<R: Read>(mut reader: R, name: &str) -> Result<MaterialTable> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Parse {
        source_name: name.to_string(),
        line: 0,
        message: format!("input is not valid UTF-8: {e}"),
    })?;
    parse_material_csv(&text, name)
}

/// Parses material CSV text. See the module docs for the grammar.
pub fn parse_material_csv(text: &str, name: &str) -> Result<MaterialTable> {
    let parse_err = |line: usize, message: String| Error::Parse {
        source_name: name.to_string(),
        line,
        message,
    };

    let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
    let scale = match lines.next() {
        Some((_, HEADER_NM)) => 1.0,
        Some((_, HEADER_UM)) => 1000.0,
        Some((line, other)) => {
            return Err(parse_err(
                line,
                format!("expected header '{HEADER_NM}' or '{HEADER_UM}', found '{other}'"),
            ))
        }
        None => return Err(parse_err(1, "empty input".into())),
    };

    let mut samples = Vec::new();
    for (line, raw) in lines {
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        if raw.ends_with('\r') {
            return Err(parse_err(line, "carriage return found; lines must end with '\\n'".into()));
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(line, format!("expected 3 fields, found {}", fields.len())));
        }
        let mut values = [0.0f64; 3];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("'{field}' is not a decimal number")))?;
        }
        samples.push(Sample::new(values[0] * scale, values[1], values[2]));
    }
    MaterialTable::new(name, samples)
}

/// Result of [`coverage_check`].
#[derive(Debug, Clone, PartialEq)]
pub enum Coverage {
    Complete,
    Gaps(Vec<CoverageGap>),
}

impl Coverage {
    pub fn is_complete(&self) -> bool {
        matches!(self, Coverage::Complete)
    }
}

/// A material whose table does not span the whole evaluation band.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGap {
    pub material: String,
    /// Uncovered sub-intervals of the band, in nm.
    pub missing: Vec<(f64, f64)>,
}

impl std::fmt::Display for CoverageGap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "material '{}' misses", self.material)?;
        for (i, (lo, hi)) in self.missing.iter().enumerate() {
            let sep = if i == 0 { " " } else { ", " };
            write!(f, "{sep}{lo}-{hi} nm")?;
        }
        Ok(())
    }
}

/// Checks that every table spans `[min_nm, max_nm]`.
pub fn coverage_check<'a, I>(tables: I, min_nm: f64, max_nm: f64) -> Result<Coverage>
where
    I: IntoIterator<Item = &'a MaterialTable>,
{
    if !(min_nm < max_nm) {
        return Err(Error::Validation(format!(
            "band lower bound {min_nm} must be below upper bound {max_nm}"
        )));
    }
    let mut seen = 0usize;
    let mut gaps = Vec::new();
    for table in tables {
        seen += 1;
        let (lo, hi) = table.range();
        let mut missing = Vec::new();
        if lo > min_nm {
            missing.push((min_nm, lo.min(max_nm)));
        }
        if hi < max_nm {
            missing.push((hi.max(min_nm), max_nm));
        }
        if !missing.is_empty() {
            gaps.push(CoverageGap {
                material: table.name().to_string(),
                missing,
            });
        }
    }
    if seen == 0 {
        return Err(Error::Validation("coverage check needs at least one material".into()));
    }
    Ok(if gaps.is_empty() {
        Coverage::Complete
    } else {
        Coverage::Gaps(gaps)
    })
}

const BUNDLED: &[(&str, &str)] = &[
    ("Al", include_str!("../materials/Al.csv")),
    ("Cr", include_str!("../materials/Cr.csv")),
    ("Cu", include_str!("../materials/Cu.csv")),
    ("MgF2", include_str!("../materials/MgF2.csv")),
    ("SiO2", include_str!("../materials/SiO2.csv")),
    ("Ti", include_str!("../materials/Ti.csv")),
    ("ZnS", include_str!("../materials/ZnS.csv")),
    ("glass", include_str!("../materials/glass.csv")),
];

/// Named collection of material tables shared between evaluations.
#[derive(Debug, Clone, Default)]
pub struct MaterialLibrary {
    tables: BTreeMap<String, Arc<MaterialTable>>,
}

impl MaterialLibrary {
    /// An empty library (apart from the implicit `air`).
    pub fn new() -> Self {
        Self::default()
    }

    /// The tables compiled into the crate: Al, Cr, Cu, MgF2, SiO2, Ti, ZnS and
    /// a constant `glass` (n = 1.5).
    pub fn bundled() -> Self {
        let mut lib = Self::new();
        for (name, csv) in BUNDLED {
            let table = parse_material_csv(csv, name).expect("bundled material table is valid");
            lib.insert(table);
        }
        lib
    }

    /// Loads every `*.csv` in `dir`, naming each table after its file stem.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut lib = Self::new();
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
            .collect();
        paths.sort();
        for path in paths {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::Io(format!("{}: unusable file name", path.display())))?
                .to_string();
            lib.load_file(&stem, &path)?;
        }
        Ok(lib)
    }

    /// Loads one CSV file under `name`, replacing any table of the same name.
    pub fn load_file(&mut self, name: &str, path: &Path) -> Result<Arc<MaterialTable>> {
        let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let table = load_material_table(file, name)?;
        Ok(self.insert(table))
    }

    pub fn insert(&mut self, table: MaterialTable) -> Arc<MaterialTable> {
        let table = Arc::new(table);
        self.tables.insert(table.name().to_string(), table.clone());
        table
    }

    /// Looks up a table; `air` always resolves.
    pub fn get(&self, name: &str) -> Result<Arc<MaterialTable>> {
        if let Some(t) = self.tables.get(name) {
            return Ok(t.clone());
        }
        if name == "air" {
            return Ok(Arc::new(MaterialTable::air()));
        }
        Err(Error::Validation(format!(
            "unknown material '{name}' (available: {})",
            self.names().collect::<Vec<_>>().join(", ")
        )))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_csv() -> &'static str {
        "wavelength_nm,n,k\n400,1.5,0\n700,1.5,0"
    }

    #[test]
    fn minimal_table_loads() {
        let t = load_material_table(constant_csv().as_bytes(), "c").unwrap();
        assert_eq!(t.samples().len(), 2);
        assert_eq!(t.index_at(550.0).unwrap(), Complex64::new(1.5, -0.0));
    }

    #[test]
    fn rows_are_sorted() {
        let a = parse_material_csv("wavelength_nm,n,k\n700,1.5,0\n400,1.5,0", "c").unwrap();
        let b = parse_material_csv(constant_csv(), "c").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_n_is_rejected() {
        let err = parse_material_csv("wavelength_nm,n,k\n400,-1,0\n700,1.5,0", "c").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse_material_csv("wavelength_nm,n,k\n# c\n400,1.5,0\n500,x,0\n", "c").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other}"),
        }
        let err = parse_material_csv("wavelength_nm,n,k\n400,1.5\n", "c").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn bad_header_and_short_tables() {
        assert!(matches!(
            parse_material_csv("lambda,n,k\n400,1,0\n500,1,0", "c"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_material_csv("wavelength_nm,n,k\n400,1,0\n", "c"),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_material_csv("wavelength_nm,n,k\n400,1,0\n400,1.2,0\n", "c"),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse_material_csv("wavelength_nm,n,k\n400,1,0\r\n500,1,0\n", "c"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn micrometre_header_is_scaled() {
        let t = parse_material_csv("wavelength_um,n,k\n0.4,2,0\n0.6,3,1\n", "um").unwrap();
        assert_eq!(t.range(), (400.0, 600.0));
    }

    #[test]
    fn midpoint_interpolation() {
        let t = MaterialTable::new("m", vec![Sample::new(400.0, 2.0, 0.0), Sample::new(600.0, 3.0, 1.0)]).unwrap();
        assert_eq!(t.index_at(500.0).unwrap(), Complex64::new(2.5, -0.5));
    }

    #[test]
    fn out_of_range_is_an_error() {
        let t = parse_material_csv(constant_csv(), "c").unwrap();
        match t.index_at(399.0).unwrap_err() {
            Error::OutOfRange { material, min_nm, max_nm, .. } => {
                assert_eq!(material, "c");
                assert_eq!((min_nm, max_nm), (400.0, 700.0));
            }
            other => panic!("unexpected {other}"),
        }
        assert!(t.index_at(f64::NAN).is_err());
    }

    #[test]
    fn coverage() {
        let full = MaterialTable::constant("full", 1.5, 0.0, 400.0, 700.0).unwrap();
        let short = MaterialTable::constant("short", 1.5, 0.0, 450.0, 700.0).unwrap();
        assert_eq!(coverage_check([&full], 400.0, 700.0).unwrap(), Coverage::Complete);
        match coverage_check([&full, &short], 400.0, 700.0).unwrap() {
            Coverage::Gaps(gaps) => {
                assert_eq!(gaps.len(), 1);
                assert_eq!(gaps[0].material, "short");
                assert_eq!(gaps[0].missing, vec![(400.0, 450.0)]);
                assert_eq!(gaps[0].to_string(), "material 'short' misses 400-450 nm");
            }
            Coverage::Complete => panic!("gap not detected"),
        }
        let none: [&MaterialTable; 0] = [];
        assert!(matches!(coverage_check(none, 400.0, 700.0), Err(Error::Validation(_))));
    }

    #[test]
    fn bundled_library_covers_experiment_bands() {
        let lib = MaterialLibrary::bundled();
        for name in ["Al", "Cr", "Cu", "MgF2", "SiO2", "Ti", "ZnS", "glass"] {
            let t = lib.get(name).unwrap();
            assert!(t.covers(300.0, 1500.0), "{name} range {:?}", t.range());
        }
        assert_eq!(lib.get("air").unwrap().index_at(550.0).unwrap(), Complex64::new(1.0, -0.0));
        assert!(lib.get("unobtainium").is_err());
    }
}
