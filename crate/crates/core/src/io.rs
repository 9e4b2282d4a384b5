//! Flat-file formats: sampled fields (CSV or JSON), eigenfunction specs, expansions and
//! run manifests with content digests.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eigen::{make_sphere_eigenfunction, make_torus_eigenfunction, Eigenfunction, SphereEigenfunction, TorusEigenfunction, TorusMode};
use crate::error::{invalid, Error, Result};
use crate::field::{BandLimit, Field, Manifold, ScalarField};
use crate::sphharm::HarmonicExpansion;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => Ok(Format::Csv),
            Some("json") => Ok(Format::Json),
            _ => Err(Error::Config(format!("cannot tell the format of {}; use .csv or .json", path.display()))),
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format `{s}` (csv or json)"))),
        }
    }
}

/// `degree:K` or `wavenumber:B`.
pub fn parse_band(s: &str) -> Result<BandLimit<f64>> {
    let (kind, v) = s.trim().split_once(':').ok_or_else(|| Error::Config(format!("band `{s}` needs the form kind:value")))?;
    match kind.trim() {
        "degree" => v.trim().parse().map(BandLimit::Degree).map_err(|_| Error::Config(format!("bad degree in `{s}`"))),
        "wavenumber" => match v.trim().parse::<f64>() {
            Ok(b) if b > 0.0 && b.is_finite() => Ok(BandLimit::Wavenumber(b)),
            _ => Err(Error::Config(format!("bad wavenumber in `{s}`"))),
        },
        _ => Err(Error::Config(format!("unknown band kind in `{s}`"))),
    }
}

pub fn band_label(b: &BandLimit<f64>) -> String {
    match b {
        BandLimit::Degree(k) => format!("degree:{k}"),
        BandLimit::Wavenumber(w) => format!("wavenumber:{w}"),
    }
}

/// Externally computed samples of a function on a manifold.
#[derive(Debug, Clone)]
pub struct SampledField {
    pub domain: Manifold<f64>,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub gradients: Option<Vec<Vec<f64>>>,
    pub band: BandLimit<f64>,
    pub provenance: String,
}

const DOMAIN_TOL: f64 = 1e-9;

/// Where a sample came from, for error messages: (row, file line).
type Origin = (usize, Option<usize>);

fn at(o: Origin) -> String {
    match o.1 {
        Some(l) => format!("row {} (line {l})", o.0),
        None => format!("row {}", o.0),
    }
}

fn parse_err(o: Origin, msg: String) -> Error {
    Error::Parse { line: o.1.unwrap_or(o.0), msg: format!("{}: {msg}", at(o)) }
}

impl SampledField {
    /// Checks lengths, finiteness, domain membership and duplicate points.
    pub fn new(
        domain: Manifold<f64>,
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
        gradients: Option<Vec<Vec<f64>>>,
        band: BandLimit<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let origins: Vec<Origin> = (1..=points.len()).map(|i| (i, None)).collect();
        Self::checked(domain, points, values, gradients, band, provenance.into(), &origins)
    }

    fn checked(
        domain: Manifold<f64>,
        points: Vec<Vec<f64>>,
        values: Vec<f64>,
        gradients: Option<Vec<Vec<f64>>>,
        band: BandLimit<f64>,
        provenance: String,
        origins: &[Origin],
    ) -> Result<Self> {
        if points.is_empty() {
            return invalid("sampled field has no points");
        }
        if values.len() != points.len() {
            return invalid(format!("{} points but {} values", points.len(), values.len()));
        }
        if let Some(g) = &gradients {
            if g.len() != points.len() {
                return invalid(format!("{} points but {} gradients", points.len(), g.len()));
            }
        }
        let dim = domain.ambient_dim();
        for (i, p) in points.iter().enumerate() {
            let o = origins[i];
            if p.len() != dim {
                return Err(parse_err(o, format!("{} coordinates, domain needs {dim}", p.len())));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(parse_err(o, "non-finite coordinate".into()));
            }
            if !values[i].is_finite() {
                return Err(parse_err(o, format!("value is {}", values[i])));
            }
            if let Some(g) = &gradients {
                if g[i].len() != dim || g[i].iter().any(|v| !v.is_finite()) {
                    return Err(parse_err(o, "gradient must have one finite entry per coordinate".into()));
                }
            }
        }
        let outside: Vec<String> =
            points.iter().enumerate().filter(|(_, p)| !in_domain(&domain, p)).map(|(i, _)| at(origins[i])).collect();
        if !outside.is_empty() {
            return Err(Error::Domain(format!("{} points outside {}: {}", outside.len(), domain.label(), outside.join(", "))));
        }
        let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            if let Some(&j) = seen.get(&point_key(&domain, p)) {
                return Err(parse_err(origins[i], format!("duplicate of {}", at(origins[j]))));
            }
            seen.insert(point_key(&domain, p), i);
        }
        Ok(SampledField { domain, points, values, gradients, band, provenance })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Samples `field` at `points`, keeping gradients when `with_gradients`.
    pub fn sample(field: &dyn ScalarField<f64>, points: Vec<Vec<f64>>, with_gradients: bool, provenance: &str) -> Result<Self> {
        let band = field.band_limit().ok_or_else(|| Error::InvalidArgument("field declares no band limit".into()))?;
        let evals: Vec<(f64, Vec<f64>)> = points.iter().map(|p| field.eval(p)).collect();
        let values = evals.iter().map(|e| e.0).collect();
        let gradients = with_gradients.then(|| evals.into_iter().map(|e| e.1).collect());
        Self::new(field.manifold(), points, values, gradients, band, provenance)
    }

    pub fn require_gradients(&self) -> Result<&[Vec<f64>]> {
        self.gradients
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("sampled field carries no gradients; this operation needs them".into()))
    }

    /// max |∇f| / max |f| over the samples.
    pub fn sample_gradient_ratio(&self) -> Result<f64> {
        let g = self.require_gradients()?;
        let gmax = g.iter().map(|v| v.iter().map(|a| a * a).sum::<f64>().sqrt()).fold(0.0, f64::max);
        let vmax = self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if vmax == 0.0 {
            return invalid("all sample values vanish");
        }
        Ok(gmax / vmax)
    }

    pub fn to_csv(&self) -> String {
        let dim = self.domain.ambient_dim();
        let mut s = String::new();
        let _ = writeln!(s, "# domain={}", self.domain.label());
        let _ = writeln!(s, "# band={}", band_label(&self.band));
        let _ = writeln!(s, "# provenance={}", self.provenance.replace('\n', " "));
        let mut cols: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        cols.push("value".into());
        if self.gradients.is_some() {
            cols.extend((0..dim).map(|i| format!("g{i}")));
        }
        s.push_str(&cols.join(","));
        s.push('\n');
        for (i, p) in self.points.iter().enumerate() {
            let mut row: Vec<String> = p.iter().map(|v| format!("{v:.17e}")).collect();
            row.push(format!("{:.17e}", self.values[i]));
            if let Some(g) = &self.gradients {
                row.extend(g[i].iter().map(|v| format!("{v:.17e}")));
            }
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SampledFile::from(self);
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<()> {
        let text = match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json()?,
        };
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut meta: HashMap<String, (String, usize)> = HashMap::new();
        let mut skipped = 0;
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if let Some(body) = t.strip_prefix('#') {
                if let Some((k, v)) = body.split_once('=') {
                    meta.insert(k.trim().to_string(), (v.trim().to_string(), i + 1));
                }
                skipped = i + 1;
            } else if t.is_empty() {
                skipped = i + 1;
            } else {
                break;
            }
        }
        let header_line = |key: &str| -> Result<&(String, usize)> {
            meta.get(key).ok_or_else(|| Error::Parse { line: 1, msg: format!("header must declare `# {key}=...`") })
        };
        let (d, dl) = header_line("domain")?;
        let domain = Manifold::parse(d).map_err(|e| Error::Parse { line: *dl, msg: e.to_string() })?;
        let (b, bl) = header_line("band")?;
        let band = parse_band(b).map_err(|e| Error::Parse { line: *bl, msg: e.to_string() })?;
        let provenance = meta.get("provenance").map(|p| p.0.clone()).unwrap_or_default();

        let body: String = text.lines().skip(skipped).map(|l| format!("{l}\n")).collect();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(body.as_bytes());
        let header_at = skipped + 1;
        let cols: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse { line: header_at, msg: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        let dim = domain.ambient_dim();
        let coord: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        let grads: Vec<String> = (0..dim).map(|i| format!("g{i}")).collect();
        let mut expect = coord.clone();
        expect.push("value".into());
        let has_grad = cols.len() == 2 * dim + 1;
        if has_grad {
            expect.extend(grads);
        }
        if cols != expect {
            return Err(Error::Parse { line: header_at, msg: format!("columns must be {}, found {}", expect.join(","), cols.join(",")) });
        }
        let (mut points, mut values, mut gradients, mut origins) = (vec![], vec![], vec![], vec![]);
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse { line: header_at + row + 1, msg: e.to_string() })?;
            let line = skipped + rec.position().map_or(row + 2, |p| p.line() as usize);
            let o = (row + 1, Some(line));
            if rec.len() != cols.len() {
                return Err(parse_err(o, format!("{} fields, expected {}", rec.len(), cols.len())));
            }
            let nums: Vec<f64> = rec
                .iter()
                .enumerate()
                .map(|(j, f)| f.parse::<f64>().map_err(|_| parse_err(o, format!("column {} is not a number: `{f}`", cols[j]))))
                .collect::<Result<_>>()?;
            points.push(nums[..dim].to_vec());
            values.push(nums[dim]);
            if has_grad {
                gradients.push(nums[dim + 1..].to_vec());
            }
            origins.push(o);
        }
        Self::checked(domain, points, values, has_grad.then_some(gradients), band, provenance, &origins)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SampledFile =
            serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
        let domain = Manifold::parse(&f.domain)?;
        let band = parse_band(&f.band)?;
        let origins: Vec<Origin> = (1..=f.points.len()).map(|i| (i, None)).collect();
        if f.values.len() != f.points.len() {
            return invalid(format!("{} points but {} values", f.points.len(), f.values.len()));
        }
        let values = f.values();
        Self::checked(domain, f.points, values, f.gradients, band, f.provenance.unwrap_or_default(), &origins)
    }
}

#[derive(Serialize, Deserialize)]
struct SampledFile {
    domain: String,
    band: String,
    #[serde(default)]
    provenance: Option<String>,
    points: Vec<Vec<f64>>,
    // JSON has no NaN, so null stands in for a missing value and is rejected as such
    values: Vec<Option<f64>>,
    #[serde(default)]
    gradients: Option<Vec<Vec<f64>>>,
}

impl SampledFile {
    fn values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect()
    }
}

impl From<&SampledField> for SampledFile {
    fn from(s: &SampledField) -> Self {
        SampledFile {
            domain: s.domain.label(),
            band: band_label(&s.band),
            provenance: Some(s.provenance.clone()),
            points: s.points.clone(),
            values: s.values.iter().map(|&v| Some(v)).collect(),
            gradients: s.gradients.clone(),
        }
    }
}

fn in_domain(m: &Manifold<f64>, p: &[f64]) -> bool {
    match m {
        Manifold::Torus { period, .. } => p.iter().all(|&v| v >= -DOMAIN_TOL && v < period + DOMAIN_TOL),
        _ => m.contains(p, DOMAIN_TOL),
    }
}

fn point_key(m: &Manifold<f64>, p: &[f64]) -> Vec<i64> {
    let q = 1e10;
    match m {
        Manifold::Torus { period, .. } => p
            .iter()
            .map(|&v| {
                let w = v.rem_euclid(*period);
                let k = (w * q).round() as i64;
                if k == (period * q).round() as i64 {
                    0
                } else {
                    k
                }
            })
            .collect(),
        _ => p.iter().map(|&v| (v * q).round() as i64).collect(),
    }
}

/// Reads a file, naming it in the error.
pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Reads a sampled field, taking the format from the extension when not given.
pub fn ingest(path: &Path, format: Option<Format>) -> Result<SampledField> {
    let format = match format {
        Some(f) => f,
        None => Format::from_path(path)?,
    };
    let text = read_text(path)?;
    match format {
        Format::Csv => SampledField::from_csv(&text),
        Format::Json => SampledField::from_json(&text),
    }
}

/// Points of the uniform n^d grid on the torus, last coordinate fastest.
pub fn torus_grid(d: usize, n: usize) -> Vec<Vec<f64>> {
    let h = std::f64::consts::TAU / n as f64;
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; d];
            for c in p.iter_mut().rev() {
                *c = (idx % n) as f64 * h;
                idx /= n;
            }
            p
        })
        .collect()
}

/// Trigonometric interpolant of samples on a uniform grid of the flat torus.
#[derive(Debug, Clone)]
pub struct TorusInterpolant {
    d: usize,
    n: usize,
    /// DFT coefficients / n^d, row-major with the last axis fastest.
    coef: Vec<Complex<f64>>,
    band: BandLimit<f64>,
}

impl TorusInterpolant {
    /// Requires the samples to fill a uniform n^d grid (any order).
    pub fn new(s: &SampledField) -> Result<Self> {
        let d = match s.domain {
            Manifold::Torus { dim, period } if (period - std::f64::consts::TAU).abs() < 1e-12 => dim,
            _ => return invalid("trigonometric interpolation needs samples on the 2π-periodic torus"),
        };
        let n = (s.len() as f64).powf(1.0 / d as f64).round() as usize;
        if n < 2 || n.pow(d as u32) != s.len() {
            return invalid(format!("{} samples do not form an n^{d} grid", s.len()));
        }
        let h = std::f64::consts::TAU / n as f64;
        let mut data = vec![Complex::new(f64::NAN, 0.0); s.len()];
        for (p, &v) in s.points.iter().zip(&s.values) {
            let mut idx = 0;
            for &c in p {
                let t = c.rem_euclid(std::f64::consts::TAU) / h;
                let k = t.round();
                if (t - k).abs() > 1e-6 {
                    return invalid(format!("point {p:?} is off the uniform grid of spacing 2π/{n}"));
                }
                idx = idx * n + (k as usize % n);
            }
            data[idx] = Complex::new(v, 0.0);
        }
        if data.iter().any(|c| c.re.is_nan()) {
            return invalid("uniform grid has missing nodes");
        }
        let fft = FftPlanner::new().plan_fft_forward(n);
        let mut line = vec![Complex::new(0.0, 0.0); n];
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            for start in 0..data.len() {
                if !(start / stride).is_multiple_of(n) {
                    continue;
                }
                for (j, l) in line.iter_mut().enumerate() {
                    *l = data[start + j * stride];
                }
                fft.process(&mut line);
                for (j, l) in line.iter().enumerate() {
                    data[start + j * stride] = *l;
                }
            }
        }
        let scale = 1.0 / s.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        Ok(TorusInterpolant { d, n, coef: data, band: s.band })
    }

    /// Per-axis factors e_k(x) and their derivatives; the Nyquist mode uses cos so the
    /// interpolant stays real.
    fn factors(&self, x: f64) -> (Vec<Complex<f64>>, Vec<Complex<f64>>) {
        let n = self.n;
        let mut e = Vec::with_capacity(n);
        let mut de = Vec::with_capacity(n);
        for k in 0..n {
            if 2 * k == n {
                let f = k as f64;
                e.push(Complex::new((f * x).cos(), 0.0));
                de.push(Complex::new(-f * (f * x).sin(), 0.0));
            } else {
                let f = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
                let z = Complex::new(0.0, f * x).exp();
                e.push(z);
                de.push(Complex::new(0.0, f) * z);
            }
        }
        (e, de)
    }

    /// Contracts the coefficient tensor with one factor vector per axis.
    fn contract(&self, per_axis: &[&[Complex<f64>]]) -> f64 {
        let mut cur = self.coef.clone();
        for axis in (0..self.d).rev() {
            let f = per_axis[axis];
            cur = cur.chunks(self.n).map(|c| c.iter().zip(f).map(|(a, b)| a * b).sum()).collect();
        }
        cur[0].re
    }
}

impl Field<f64> for TorusInterpolant {
    fn manifold(&self) -> Manifold<f64> {
        Manifold::torus(self.d)
    }
    fn value(&self, x: &[f64]) -> f64 {
        let fs: Vec<_> = x.iter().map(|&c| self.factors(c).0).collect();
        let refs: Vec<&[Complex<f64>]> = fs.iter().map(Vec::as_slice).collect();
        self.contract(&refs)
    }
    fn band_limit(&self) -> Option<BandLimit<f64>> {
        Some(self.band)
    }
}

impl ScalarField<f64> for TorusInterpolant {
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let fs: Vec<_> = x.iter().map(|&c| self.factors(c)).collect();
        let plain: Vec<&[Complex<f64>]> = fs.iter().map(|f| f.0.as_slice()).collect();
        let v = self.contract(&plain);
        let g = (0..self.d)
            .map(|i| {
                let mut refs = plain.clone();
                refs[i] = fs[i].1.as_slice();
                self.contract(&refs)
            })
            .collect();
        (v, g)
    }
}

/// Eigenfunction description `{manifold, d_or_n, modes_or_coefficients, seed}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenSpec {
    /// `torus` or `sphere`.
    pub manifold: String,
    pub d_or_n: usize,
    pub modes_or_coefficients: EigenData,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenData {
    Modes(Vec<TorusMode<f64>>),
    Harmonic { degree: usize, coefficients: Vec<f64> },
    /// Draw from the seed: |m|² = level on tori, degree = level on spheres.
    Random { level: u64, count: usize },
}

impl EigenSpec {
    pub fn build(&self) -> Result<Eigenfunction<f64>> {
        let kind = self.manifold.split(':').next().unwrap_or("");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.unwrap_or(0));
        match (kind, &self.modes_or_coefficients) {
            ("torus", EigenData::Modes(m)) => make_torus_eigenfunction(self.d_or_n, m.clone()),
            ("torus", EigenData::Random { level, count }) => {
                Ok(Eigenfunction::Torus(TorusEigenfunction::random(self.d_or_n, *level as i64, *count, &mut rng)?))
            }
            ("sphere", EigenData::Harmonic { degree, coefficients }) => {
                make_sphere_eigenfunction(self.d_or_n, *degree, coefficients.clone())
            }
            ("sphere", EigenData::Random { level, .. }) => {
                Ok(Eigenfunction::Sphere(SphereEigenfunction::random(self.d_or_n, *level as usize, &mut rng)?))
            }
            _ => Err(Error::Config(format!("eigen spec: {} cannot use the given modes_or_coefficients", self.manifold))),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
    }
}

pub fn read_expansion(path: &Path) -> Result<HarmonicExpansion<f64>> {
    HarmonicExpansion::from_json(&read_text(path)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArtifactDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one CLI run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub version: String,
    pub seed: Option<u64>,
    pub started: String,
    pub finished: Option<String>,
    pub outputs: Vec<ArtifactDigest>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.into(),
            config,
            version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).into(),
            seed,
            started: now(),
            finished: None,
            outputs: vec![],
        }
    }

    /// Writes `contents` to `dir/name` and records its digest.
    pub fn write_artifact(&mut self, dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(name);
        std::fs::write(&path, contents)?;
        self.outputs.retain(|o| o.path != name);
        self.outputs.push(ArtifactDigest { path: name.into(), sha256: sha256_hex(contents), bytes: contents.len() as u64 });
        Ok(path)
    }

    /// Stamps the end time and writes `dir/manifest.json`.
    pub fn finish(&mut self, dir: &Path) -> Result<PathBuf> {
        self.finished = Some(now());
        std::fs::create_dir_all(dir)?;
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&read_text(path)?)?)
    }

    /// Names of outputs under `dir` whose current contents no longer match.
    pub fn stale_outputs(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = vec![];
        for o in &self.outputs {
            match std::fs::read(dir.join(&o.path)) {
                Ok(b) if sha256_hex(&b) == o.sha256 => {}
                _ => bad.push(o.path.clone()),
            }
        }
        Ok(bad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE: &str = "# domain=torus:2\n# band=wavenumber:1\nx0,x1,value\n0.5,0.0,0.479425538604203\n1.0,2.0,0.8414709848078965\n2.0,1.0,0.9092974268256817\n";

    #[test]
    fn three_rows() {
        let s = SampledField::from_csv(THREE).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.gradients.is_none());
        assert!(s.sample_gradient_ratio().is_err());
    }

    #[test]
    fn nan_names_the_row() {
        let bad = THREE.replace("0.8414709848078965", "NaN");
        let e = SampledField::from_csv(&bad).unwrap_err().to_string();
        assert!(e.contains("row 2") && e.contains("line 5"), "{e}");
    }

    #[test]
    fn duplicates_and_domain() {
        let dup = format!("{THREE}0.5,0.0,0.1\n");
        assert!(SampledField::from_csv(&dup).unwrap_err().to_string().contains("duplicate of row 1"));
        let out = format!("{THREE}7.0,0.0,0.1\n-1,0,0\n");
        let e = SampledField::from_csv(&out).unwrap_err();
        assert!(matches!(e, Error::Domain(ref m) if m.contains("row 4") && m.contains("row 5")), "{e}");
    }

    #[test]
    fn header_is_required() {
        assert!(matches!(SampledField::from_csv("x0,x1,value\n0,0,1\n"), Err(Error::Parse { .. })));
        let bad_cols = THREE.replace("x0,x1,value", "x,y,value");
        assert!(matches!(SampledField::from_csv(&bad_cols), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn json_round_trip() {
        let s = SampledField::from_csv(THREE).unwrap();
        let back = SampledField::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back.values, s.values);
        let with_null = r#"{"domain": "torus:2", "band": "degree:1", "points": [[0, 0], [1, 1]], "values": [1.0, null]}"#;
        let e = SampledField::from_json(with_null).unwrap_err().to_string();
        assert!(e.contains("row 2"), "{e}");
    }

    #[test]
    fn interpolant_reproduces_trig_polynomial() {
        let f = |p: &[f64]| (2.0 * p[0]).cos() * p[1].sin() + 0.5 * (3.0 * p[1]).cos();
        let pts = torus_grid(2, 8);
        let vals = pts.iter().map(|p| f(p)).collect();
        let s = SampledField::new(Manifold::torus(2), pts, vals, None, BandLimit::Wavenumber(3.0), "test").unwrap();
        let it = TorusInterpolant::new(&s).unwrap();
        let x = [0.37, 5.1];
        assert!((it.value(&x) - f(&x)).abs() < 1e-13);
        let g = it.eval(&x).1;
        let dx = -2.0 * (2.0 * x[0]).sin() * x[1].sin();
        assert!((g[0] - dx).abs() < 1e-12);
    }
}
