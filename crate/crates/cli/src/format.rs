//! JSON system, domain and uncertainty files.
//!
//! Complex entries are two-element `[re, im]` arrays and matrices are
//! row-major nested arrays. A system file looks like
//!
//! ```json
//! {
//!   "version": 1,
//!   "n": 1, "m": 1, "p": 1,
//!   "famA": [ [[[-1, 0]]] ],
//!   "famB": [ [[[1, 0]]] ],
//!   "famC": [ [[[1, 0]]] ],
//!   "famD": [ [[[0, 0]]] ],
//!   "perturbation": { "A": { "blocks": [[ [[[1, 0]]] ]], "E": [[[1, 0]]] } },
//!   "delays": { "internal": [ { "family": [ [[[0.5, 0]]] ], "bound": 1.0 } ] },
//!   "domain": { "A": [ { "re": [0, 1] } ] }
//! }
//! ```
//!
//! Every family lists `X_0, X_1, ..., X_q`. Perturbation channels and the
//! delay section are optional; so is the domain, which defaults to the
//! origin.

use std::fmt;
use std::fs;
use std::path::Path;

use lpvcert_core::delay::{DelayDomain, DelaySystem, DelayedTerm};
use lpvcert_core::model::{
    AffineMatrixFamily, BoxDomain, Channel, ChannelStructure, ComplexInterval, DeltaAssignment, Interval,
    LpvSystem, PerturbationStructure, Severity,
};
use lpvcert_core::{ComplexMatrix, C64};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

const CHANNELS: [Channel; 4] = [Channel::A, Channel::B, Channel::C, Channel::D];
const FAMILY_FIELDS: [&str; 4] = ["famA", "famB", "famC", "famD"];
const CHANNEL_KEYS: [&str; 4] = ["A", "B", "C", "D"];

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {field}: {message}")]
    Validation {
        path: String,
        field: String,
        message: String,
    },
}

impl LoadError {
    /// Field path of a validation failure.
    pub fn field(&self) -> Option<&str> {
        match self {
            LoadError::Validation { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// Field-addressed validation failure before a file name is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            field: field.into(),
            message: message.to_string(),
        }
    }

    fn at(self, path: &Path) -> LoadError {
        LoadError::Validation {
            path: path.display().to_string(),
            field: self.field,
            message: self.message,
        }
    }
}

type Field<T> = Result<T, FieldError>;

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelStructureJson {
    /// `blocks[i][j]` is `D_ij`.
    pub blocks: Vec<Vec<MatrixJson>>,
    #[serde(rename = "E")]
    pub e: MatrixJson,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationJson {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<ChannelStructureJson>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<ChannelStructureJson>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<ChannelStructureJson>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<ChannelStructureJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayedTermJson {
    pub family: Vec<MatrixJson>,
    pub bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<ChannelStructureJson>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaysJson {
    #[serde(default)]
    pub internal: Vec<DelayedTermJson>,
    #[serde(default)]
    pub external: Vec<DelayedTermJson>,
}

/// `[lo, hi]`, or a single number for a degenerate interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntervalJson {
    Point(f64),
    Range([f64; 2]),
}

impl IntervalJson {
    fn to_interval(self, field: &str) -> Field<Interval> {
        let (lo, hi) = match self {
            IntervalJson::Point(x) => (x, x),
            IntervalJson::Range([lo, hi]) => (lo, hi),
        };
        Interval::new(lo, hi).map_err(|e| FieldError::new(field, e))
    }

    fn from_interval(iv: Interval) -> Self {
        if iv.lo == iv.hi {
            IntervalJson::Point(iv.lo)
        } else {
            IntervalJson::Range([iv.lo, iv.hi])
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexIntervalJson {
    pub re: IntervalJson,
    #[serde(default = "zero_interval")]
    pub im: IntervalJson,
}

fn zero_interval() -> IntervalJson {
    IntervalJson::Point(0.0)
}

/// Parameter box; one entry per non-leading parameter of each channel.
/// `Ad` and `Bd` cover the delayed families.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainJson {
    #[serde(rename = "A", default)]
    pub a: Vec<ComplexIntervalJson>,
    #[serde(rename = "B", default)]
    pub b: Vec<ComplexIntervalJson>,
    #[serde(rename = "C", default)]
    pub c: Vec<ComplexIntervalJson>,
    #[serde(rename = "D", default)]
    pub d: Vec<ComplexIntervalJson>,
    #[serde(rename = "Ad", default, skip_serializing_if = "Vec::is_empty")]
    pub ad: Vec<ComplexIntervalJson>,
    #[serde(rename = "Bd", default, skip_serializing_if = "Vec::is_empty")]
    pub bd: Vec<ComplexIntervalJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub version: u32,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    #[serde(rename = "famA", default)]
    pub fam_a: Option<Vec<MatrixJson>>,
    #[serde(rename = "famB", default)]
    pub fam_b: Option<Vec<MatrixJson>>,
    #[serde(rename = "famC", default)]
    pub fam_c: Option<Vec<MatrixJson>>,
    #[serde(rename = "famD", default)]
    pub fam_d: Option<Vec<MatrixJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delays: Option<DelaysJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainJson>,
}

/// Uncertainty values; `A` holds `Δ_ij` as `A[i][j]`. Missing channels are
/// zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaJson {
    #[serde(rename = "A", default)]
    pub a: Option<Vec<Vec<MatrixJson>>>,
    #[serde(rename = "B", default)]
    pub b: Option<Vec<Vec<MatrixJson>>>,
    #[serde(rename = "C", default)]
    pub c: Option<Vec<Vec<MatrixJson>>>,
    #[serde(rename = "D", default)]
    pub d: Option<Vec<Vec<MatrixJson>>>,
}

/// A loaded model.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Plain(LpvSystem),
    Delayed(DelaySystem),
}

impl Model {
    pub fn base(&self) -> &LpvSystem {
        match self {
            Model::Plain(s) => s,
            Model::Delayed(d) => &d.base,
        }
    }
}

/// A model together with its domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Loaded {
    pub model: Model,
    pub domain: DelayDomain,
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, LoadError> {
    serde_json::from_str(text).map_err(|e| LoadError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: strip_location(&e.to_string()),
    })
}

fn strip_location(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// Loads and validates a system file.
pub fn load_system(path: &Path) -> Result<Loaded, LoadError> {
    let file: SystemFile = parse(path, &read(path)?)?;
    file.to_model().map_err(|e| e.at(path))
}

/// Parses a system file held in memory; `name` is used in diagnostics.
pub fn parse_system(name: &str, text: &str) -> Result<Loaded, LoadError> {
    let path = Path::new(name);
    let file: SystemFile = parse(path, text)?;
    file.to_model().map_err(|e| e.at(path))
}

pub fn load_domain(path: &Path, model: &Model) -> Result<DelayDomain, LoadError> {
    let dom: DomainJson = parse(path, &read(path)?)?;
    domain_from_json(&dom, model).map_err(|e| e.at(path))
}

pub fn load_delta(path: &Path, sys: &LpvSystem) -> Result<DeltaAssignment, LoadError> {
    let dj: DeltaJson = parse(path, &read(path)?)?;
    delta_from_json(&dj, sys).map_err(|e| e.at(path))
}

fn entry(z: [f64; 2]) -> C64 {
    C64::new(z[0], z[1])
}

fn matrix_from_json(m: &MatrixJson, rows: usize, cols: Option<usize>, field: &str) -> Field<ComplexMatrix> {
    if m.len() != rows {
        return Err(FieldError::new(field, format!("expected {rows} rows, found {}", m.len())));
    }
    if rows == 0 {
        return Ok(ComplexMatrix::zeros(0, cols.unwrap_or(0)));
    }
    let width = m[0].len();
    if let Some(c) = cols {
        if width != c {
            return Err(FieldError::new(field, format!("expected {c} columns, found {width}")));
        }
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != width {
            return Err(FieldError::new(
                format!("{field}[{i}]"),
                format!("row has {} entries, expected {width}", row.len()),
            ));
        }
        for (j, z) in row.iter().enumerate() {
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(FieldError::new(format!("{field}[{i}][{j}]"), "entry is not finite"));
            }
        }
    }
    let data = m.iter().flatten().copied().map(entry).collect();
    ComplexMatrix::from_vec(rows, width, data).map_err(|e| FieldError::new(field, e))
}

pub fn matrix_to_json(m: &ComplexMatrix) -> MatrixJson {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

fn family_from_json(f: &[MatrixJson], rows: usize, cols: usize, field: &str) -> Field<AffineMatrixFamily> {
    if f.is_empty() {
        return Err(FieldError::new(field, "family needs at least the constant term"));
    }
    let coeffs = f
        .iter()
        .enumerate()
        .map(|(i, m)| matrix_from_json(m, rows, Some(cols), &format!("{field}[{i}]")))
        .collect::<Field<Vec<_>>>()?;
    AffineMatrixFamily::new(coeffs).map_err(|e| FieldError::new(field, e))
}

fn family_to_json(f: &AffineMatrixFamily) -> Vec<MatrixJson> {
    f.coeffs().iter().map(matrix_to_json).collect()
}

fn structure_from_json(
    s: Option<&ChannelStructureJson>,
    q: usize,
    rows: usize,
    cols: usize,
    field: &str,
) -> Field<ChannelStructure> {
    let Some(s) = s else {
        return Ok(ChannelStructure::empty(q, cols));
    };
    if s.blocks.len() != q + 1 {
        return Err(FieldError::new(
            format!("{field}.blocks"),
            format!("expected {} parameter slots, found {}", q + 1, s.blocks.len()),
        ));
    }
    let e = matrix_from_json(&s.e, s.e.len(), Some(cols), &format!("{field}.E"))?;
    let blocks = s
        .blocks
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, d)| matrix_from_json(d, rows, None, &format!("{field}.blocks[{i}][{j}]")))
                .collect::<Field<Vec<_>>>()
        })
        .collect::<Field<Vec<_>>>()?;
    Ok(ChannelStructure { blocks, e })
}

fn structure_to_json(s: &ChannelStructure) -> Option<ChannelStructureJson> {
    if s.block_count() == 0 && s.e.rows() == 0 {
        return None;
    }
    Some(ChannelStructureJson {
        blocks: s
            .blocks
            .iter()
            .map(|row| row.iter().map(matrix_to_json).collect())
            .collect(),
        e: matrix_to_json(&s.e),
    })
}

fn interval_from_json(c: &ComplexIntervalJson, field: &str) -> Field<ComplexInterval> {
    Ok(ComplexInterval {
        re: c.re.to_interval(&format!("{field}.re"))?,
        im: c.im.to_interval(&format!("{field}.im"))?,
    })
}

fn interval_to_json(c: &ComplexInterval) -> ComplexIntervalJson {
    ComplexIntervalJson {
        re: IntervalJson::from_interval(c.re),
        im: IntervalJson::from_interval(c.im),
    }
}

fn segment(v: &[ComplexIntervalJson], expected: usize, field: &str) -> Field<Vec<ComplexInterval>> {
    if v.len() != expected {
        return Err(FieldError::new(
            field,
            format!("expected {expected} intervals, found {}", v.len()),
        ));
    }
    v.iter()
        .enumerate()
        .map(|(i, c)| interval_from_json(c, &format!("{field}[{i}]")))
        .collect()
}

pub fn domain_from_json(d: &DomainJson, model: &Model) -> Field<DelayDomain> {
    let q = model.base().q();
    let (qad, qbd) = match model {
        Model::Plain(_) => (0, 0),
        Model::Delayed(ds) => (ds.q_ad(), ds.q_bd()),
    };
    let base = BoxDomain::new(
        segment(&d.a, q[0], "domain.A")?,
        segment(&d.b, q[1], "domain.B")?,
        segment(&d.c, q[2], "domain.C")?,
        segment(&d.d, q[3], "domain.D")?,
    );
    Ok(DelayDomain::new(
        base,
        segment(&d.ad, qad, "domain.Ad")?,
        segment(&d.bd, qbd, "domain.Bd")?,
    ))
}

pub fn domain_to_json(d: &DelayDomain) -> DomainJson {
    let seg = |v: &[ComplexInterval]| v.iter().map(interval_to_json).collect();
    DomainJson {
        a: seg(d.base.segment(Channel::A)),
        b: seg(d.base.segment(Channel::B)),
        c: seg(d.base.segment(Channel::C)),
        d: seg(d.base.segment(Channel::D)),
        ad: seg(&d.ad),
        bd: seg(&d.bd),
    }
}

fn origin_domain(model: &Model) -> DelayDomain {
    let base = BoxDomain::singleton(&model.base().origin());
    let zeros = |k: usize| vec![ComplexInterval::point(C64::new(0.0, 0.0)); k];
    match model {
        Model::Plain(_) => DelayDomain::new(base, Vec::new(), Vec::new()),
        Model::Delayed(d) => DelayDomain::new(base, zeros(d.q_ad()), zeros(d.q_bd())),
    }
}

pub fn delta_from_json(dj: &DeltaJson, sys: &LpvSystem) -> Field<DeltaAssignment> {
    let mut out = sys.zero_delta();
    let given = [&dj.a, &dj.b, &dj.c, &dj.d];
    for (k, ch) in CHANNELS.into_iter().enumerate() {
        let Some(blocks) = given[k] else { continue };
        let field = CHANNEL_KEYS[k];
        let expected = out.get(ch).to_vec();
        if blocks.len() != expected.len() {
            return Err(FieldError::new(
                field,
                format!("expected {} parameter slots, found {}", expected.len(), blocks.len()),
            ));
        }
        for (i, (row, exp_row)) in blocks.iter().zip(&expected).enumerate() {
            if row.len() != exp_row.len() {
                return Err(FieldError::new(
                    format!("{field}[{i}]"),
                    format!("expected {} blocks, found {}", exp_row.len(), row.len()),
                ));
            }
            for (j, (m, z)) in row.iter().zip(exp_row).enumerate() {
                *out.block_mut(ch, i, j) =
                    matrix_from_json(m, z.rows(), Some(z.cols()), &format!("{field}[{i}][{j}]"))?;
            }
        }
    }
    Ok(out)
}

pub fn delta_to_json(d: &DeltaAssignment) -> DeltaJson {
    let ch = |k: usize| {
        Some(
            d.deltas[k]
                .iter()
                .map(|row| row.iter().map(matrix_to_json).collect())
                .collect(),
        )
    };
    DeltaJson {
        a: ch(0),
        b: ch(1),
        c: ch(2),
        d: ch(3),
    }
}

impl SystemFile {
    pub fn to_model(&self) -> Field<Loaded> {
        if self.version != FORMAT_VERSION {
            return Err(FieldError::new(
                "version",
                format!("unsupported format version {} (expected {FORMAT_VERSION})", self.version),
            ));
        }
        let (n, m, p) = (self.n, self.m, self.p);
        let shapes = [(n, n), (n, m), (p, n), (p, m)];
        let given = [&self.fam_a, &self.fam_b, &self.fam_c, &self.fam_d];
        let mut fams = Vec::with_capacity(4);
        for k in 0..4 {
            let field = FAMILY_FIELDS[k];
            let f = given[k]
                .as_ref()
                .ok_or_else(|| FieldError::new(field, "missing required field"))?;
            fams.push(family_from_json(f, shapes[k].0, shapes[k].1, field)?);
        }
        let pj = self.perturbation.clone().unwrap_or_default();
        let pgiven = [&pj.a, &pj.b, &pj.c, &pj.d];
        let mut chans = Vec::with_capacity(4);
        for k in 0..4 {
            chans.push(structure_from_json(
                pgiven[k].as_ref(),
                fams[k].q(),
                shapes[k].0,
                shapes[k].1,
                &format!("perturbation.{}", CHANNEL_KEYS[k]),
            )?);
        }
        let mut chans = chans.into_iter();
        let pert = PerturbationStructure::new(
            chans.next().unwrap(),
            chans.next().unwrap(),
            chans.next().unwrap(),
            chans.next().unwrap(),
        );
        let mut fams = fams.into_iter();
        let (a, b, c, d) = (
            fams.next().unwrap(),
            fams.next().unwrap(),
            fams.next().unwrap(),
            fams.next().unwrap(),
        );
        let base = LpvSystem {
            n,
            m,
            p,
            a,
            b,
            c,
            d,
            pert,
        };
        first_error(base.validate().into_iter().map(|d| (d.severity, d.message)), "system")?;
        let model = match &self.delays {
            None => Model::Plain(base),
            Some(dj) => {
                let terms = |list: &[DelayedTermJson], rows: usize, cols: usize, key: &str| {
                    list.iter()
                        .enumerate()
                        .map(|(j, t)| {
                            let field = format!("delays.{key}[{j}]");
                            if !t.bound.is_finite() || t.bound < 0.0 {
                                return Err(FieldError::new(
                                    format!("{field}.bound"),
                                    "delay bound must be finite and nonnegative",
                                ));
                            }
                            let family = family_from_json(&t.family, rows, cols, &format!("{field}.family"))?;
                            let structure = structure_from_json(
                                t.structure.as_ref(),
                                family.q(),
                                rows,
                                cols,
                                &format!("{field}.structure"),
                            )?;
                            Ok(DelayedTerm::new(family, structure, t.bound))
                        })
                        .collect::<Field<Vec<_>>>()
                };
                let internal = terms(&dj.internal, n, n, "internal")?;
                let external = terms(&dj.external, n, m, "external")?;
                let ds = DelaySystem::new(base, internal, external).map_err(|e| FieldError::new("delays", e))?;
                Model::Delayed(ds)
            }
        };
        let domain = match &self.domain {
            Some(d) => domain_from_json(d, &model)?,
            None => origin_domain(&model),
        };
        Ok(Loaded { model, domain })
    }

    pub fn from_model(loaded: &Loaded) -> Self {
        let base = loaded.model.base();
        let pert = PerturbationJson {
            a: structure_to_json(base.pert.get(Channel::A)),
            b: structure_to_json(base.pert.get(Channel::B)),
            c: structure_to_json(base.pert.get(Channel::C)),
            d: structure_to_json(base.pert.get(Channel::D)),
        };
        let delays = match &loaded.model {
            Model::Plain(_) => None,
            Model::Delayed(ds) => {
                let terms = |list: &[DelayedTerm]| {
                    list.iter()
                        .map(|t| DelayedTermJson {
                            family: family_to_json(&t.family),
                            bound: t.bound,
                            structure: structure_to_json(&t.structure),
                        })
                        .collect()
                };
                Some(DelaysJson {
                    internal: terms(&ds.internal),
                    external: terms(&ds.external),
                })
            }
        };
        SystemFile {
            version: FORMAT_VERSION,
            n: base.n,
            m: base.m,
            p: base.p,
            fam_a: Some(family_to_json(&base.a)),
            fam_b: Some(family_to_json(&base.b)),
            fam_c: Some(family_to_json(&base.c)),
            fam_d: Some(family_to_json(&base.d)),
            perturbation: (pert != PerturbationJson::default()).then_some(pert),
            delays,
            domain: Some(domain_to_json(&loaded.domain)),
        }
    }
}

fn first_error(diags: impl Iterator<Item = (Severity, String)>, field: &str) -> Field<()> {
    for (sev, msg) in diags {
        if sev == Severity::Error {
            return Err(FieldError::new(field, msg));
        }
    }
    Ok(())
}

/// Serializes a model with its domain as pretty JSON.
pub fn to_json_string(loaded: &Loaded) -> String {
    let mut s = serde_json::to_string_pretty(&SystemFile::from_model(loaded)).expect("system file serializes");
    s.push('\n');
    s
}

pub fn save_system(path: &Path, loaded: &Loaded) -> std::io::Result<()> {
    fs::write(path, to_json_string(loaded))
}
