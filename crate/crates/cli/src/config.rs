//! Configuration files for the three subcommands.
//!
//! Configs are JSON documents. Reals may be written as numbers or as decimal
//! strings (`"0.5"`). Every validation error carries the line and column of
//! the offending key.

use crate::error::CliError;
use finsec::algebra::AlgebraKind;
use finsec::diagnostics::{Pipeline, Reference, Rhs, RowRule};
use finsec::models::{
    channel_matrix, channel_matrix_with_decay, jaffard_synthetic, laurent_from_symbol,
    laurent_geometric,
};
use finsec::serde_num::{f64_lenient, opt_f64_lenient, vec_f64_lenient};
use finsec::solver::Backend;
use finsec::{MatrixModel, SpaceSpec, SparseVector, WeightSpec, C64};
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// A config file kept alongside its text, for error locations.
#[derive(Clone, Debug)]
pub struct Source {
    pub path: PathBuf,
    pub text: String,
}

impl Source {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation {
            path: path.display().to_string(),
            line: 0,
            column: 0,
            message: format!("cannot read config: {e}"),
        })?;
        Ok(Source {
            path: path.to_path_buf(),
            text,
        })
    }

    pub fn from_text(path: impl Into<PathBuf>, text: impl Into<String>) -> Self {
        Source {
            path: path.into(),
            text: text.into(),
        }
    }

    pub fn parse<T: for<'de> Deserialize<'de>>(&self) -> Result<T, CliError> {
        serde_json::from_str(&self.text).map_err(|e| {
            let msg = e.to_string();
            let msg = match msg.rfind(" at line ") {
                Some(i) => msg[..i].to_string(),
                None => msg,
            };
            self.error_at(e.line(), e.column(), msg)
        })
    }

    /// The raw document, echoed into manifests.
    pub fn value(&self) -> serde_json::Value {
        serde_json::from_str(&self.text).unwrap_or(serde_json::Value::Null)
    }

    fn error_at(&self, line: usize, column: usize, message: impl Into<String>) -> CliError {
        CliError::Validation {
            path: self.path.display().to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    /// Error located at `path` (e.g. `pipelines[1].rows`), or at the
    /// deepest part of it present in the document.
    pub fn error(&self, path: &str, message: impl Into<String>) -> CliError {
        let at = locate(&self.text, &segments(path));
        let before = &self.text[..at];
        let line = before.matches('\n').count() + 1;
        let column = before.chars().rev().take_while(|&c| c != '\n').count() + 1;
        self.error_at(line, column, message)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Seg {
    Key(String),
    Index(usize),
}

fn segments(path: &str) -> Vec<Seg> {
    let mut out = Vec::new();
    for part in path.split('.').filter(|p| !p.is_empty()) {
        let (key, rest) = part.split_at(part.find('[').unwrap_or(part.len()));
        if !key.is_empty() {
            out.push(Seg::Key(key.to_string()));
        }
        for idx in rest.split('[').filter(|x| !x.is_empty()) {
            if let Ok(i) = idx.trim_end_matches(']').parse() {
                out.push(Seg::Index(i));
            }
        }
    }
    out
}

/// Byte offset of the value (or key) addressed by `path` in a JSON text.
fn locate(text: &str, path: &[Seg]) -> usize {
    let mut sc = Scanner {
        b: text.as_bytes(),
        pos: 0,
    };
    sc.ws();
    let mut best = sc.pos;
    sc.find(path, &mut best);
    best
}

struct Scanner<'a> {
    b: &'a [u8],
    pos: usize,
}

impl Scanner<'_> {
    fn peek(&self) -> u8 {
        self.b.get(self.pos).copied().unwrap_or(0)
    }

    fn ws(&mut self) {
        while self.peek().is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn string(&mut self) -> String {
        let start = self.pos + 1;
        self.pos += 1;
        while self.pos < self.b.len() && self.b[self.pos] != b'"' {
            self.pos += if self.b[self.pos] == b'\\' { 2 } else { 1 };
        }
        let raw = String::from_utf8_lossy(&self.b[start..self.pos.min(self.b.len())]).into_owned();
        self.pos += 1;
        raw
    }

    /// Walks the value at the cursor, recording in `best` the deepest
    /// position of `path` reached.
    fn find(&mut self, path: &[Seg], best: &mut usize) -> bool {
        self.ws();
        let Some(seg) = path.first() else {
            *best = self.pos;
            return true;
        };
        match self.peek() {
            b'{' => {
                self.pos += 1;
                loop {
                    self.ws();
                    if self.peek() != b'"' {
                        self.pos += 1;
                        return false;
                    }
                    let key_at = self.pos;
                    let key = self.string();
                    self.ws();
                    self.pos += 1;
                    if *seg == Seg::Key(key) {
                        *best = key_at;
                        return path.len() == 1 || self.find(&path[1..], best);
                    }
                    self.skip();
                    self.ws();
                    if self.peek() == b',' {
                        self.pos += 1;
                    } else {
                        self.pos += 1;
                        return false;
                    }
                }
            }
            b'[' => {
                self.pos += 1;
                let mut i = 0;
                loop {
                    self.ws();
                    if self.peek() == b']' {
                        self.pos += 1;
                        return false;
                    }
                    if *seg == Seg::Index(i) {
                        *best = self.pos;
                        return self.find(&path[1..], best);
                    }
                    self.skip();
                    self.ws();
                    if self.peek() == b',' {
                        self.pos += 1;
                        i += 1;
                    } else {
                        self.pos += 1;
                        return false;
                    }
                }
            }
            _ => false,
        }
    }

    fn skip(&mut self) {
        self.ws();
        match self.peek() {
            b'"' => {
                self.string();
            }
            b'{' | b'[' => {
                let mut depth = 0usize;
                while self.pos < self.b.len() {
                    match self.b[self.pos] {
                        b'"' => {
                            self.string();
                            continue;
                        }
                        b'{' | b'[' => depth += 1,
                        b'}' | b']' => {
                            depth -= 1;
                            if depth == 0 {
                                self.pos += 1;
                                return;
                            }
                        }
                        _ => {}
                    }
                    self.pos += 1;
                }
            }
            _ => {
                while self.pos < self.b.len() && !b",}] \t\r\n".contains(&self.b[self.pos]) {
                    self.pos += 1;
                }
            }
        }
    }
}

/// A complex number written as a real (number or decimal string) or as a
/// `[re, im]` pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scalar(pub C64);

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Scalar;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a real number, a decimal string or a [re, im] pair")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Scalar, E> {
                Ok(Scalar(C64::new(v, 0.0)))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Scalar, E> {
                self.visit_f64(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Scalar, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Scalar, E> {
                let x: f64 = f64_lenient(de::value::StrDeserializer::<E>::new(v))?;
                self.visit_f64(x)
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Scalar, A::Error> {
                let re: Lenient = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let im: Lenient = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<Lenient>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(Scalar(C64::new(re.0, im.0)))
            }
        }
        d.deserialize_any(V)
    }
}

impl Serialize for Scalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.im == 0.0 {
            s.serialize_f64(self.0.re)
        } else {
            [self.0.re, self.0.im].serialize(s)
        }
    }
}

struct Lenient(f64);

impl<'de> Deserialize<'de> for Lenient {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        f64_lenient(d).map(Lenient)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Identity,
    Laurent,
    LaurentGeometric,
    Jaffard,
    Channel,
}

/// A named model constructor with its parameters.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: Option<ModelName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// geometric ratio of the Laurent counterexample
    #[serde(
        default,
        deserialize_with = "opt_f64_lenient",
        skip_serializing_if = "Option::is_none"
    )]
    pub c: Option<f64>,
    /// decay exponent of the Jaffard model
    #[serde(
        default,
        deserialize_with = "opt_f64_lenient",
        skip_serializing_if = "Option::is_none"
    )]
    pub s: Option<f64>,
    #[serde(
        default,
        deserialize_with = "opt_f64_lenient",
        skip_serializing_if = "Option::is_none"
    )]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hermitian: Option<bool>,
    /// Laurent symbol: diagonal offset `k - l` to value
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<BTreeMap<String, Scalar>>,
    #[serde(
        default,
        deserialize_with = "opt_vec_lenient",
        skip_serializing_if = "Option::is_none"
    )]
    pub pulse: Option<Vec<f64>>,
    #[serde(
        default,
        deserialize_with = "opt_vec_lenient",
        skip_serializing_if = "Option::is_none"
    )]
    pub channel: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(
        default,
        deserialize_with = "opt_f64_lenient",
        skip_serializing_if = "Option::is_none"
    )]
    pub decay: Option<f64>,
    /// added to the diagonal after construction
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Scalar>,
}

fn opt_vec_lenient<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    vec_f64_lenient(d).map(Some)
}

impl ModelConfig {
    fn set_fields(&self) -> Vec<&'static str> {
        let flags = [
            ("dim", self.dim.is_some()),
            ("c", self.c.is_some()),
            ("s", self.s.is_some()),
            ("amplitude", self.amplitude.is_some()),
            ("hermitian", self.hermitian.is_some()),
            ("symbol", self.symbol.is_some()),
            ("pulse", self.pulse.is_some()),
            ("channel", self.channel.is_some()),
            ("t", self.t.is_some()),
            ("r", self.r.is_some()),
            ("decay", self.decay.is_some()),
        ];
        flags.iter().filter(|f| f.1).map(|f| f.0).collect()
    }

    /// Builds the model; `key` is the config key holding this record.
    pub fn build(&self, src: &Source, key: &str, seed: u64) -> Result<MatrixModel, CliError> {
        let at = |field: &str| format!("{key}.{field}");
        let name = self
            .name
            .ok_or_else(|| src.error(key, format!("{key}.name is required")))?;
        let allowed: &[&str] = match name {
            ModelName::Identity => &["dim"],
            ModelName::Laurent => &["symbol"],
            ModelName::LaurentGeometric => &["c"],
            ModelName::Jaffard => &["s", "amplitude", "dim", "hermitian"],
            ModelName::Channel => &["pulse", "channel", "t", "r", "decay"],
        };
        for field in self.set_fields() {
            if !allowed.contains(&field) {
                return Err(src.error(
                    &at(field),
                    format!("{key}.{field} does not apply to model {name:?}"),
                ));
            }
        }
        let require = |v: Option<f64>, field: &str| {
            v.ok_or_else(|| src.error(key, format!("{key}.{field} is required for model {name:?}")))
        };
        let numerical =
            |field: &str, e: finsec::FsmError| src.error(&at(field), format!("{key}: {e}"));
        let model = match name {
            ModelName::Identity => MatrixModel::identity(self.dim.unwrap_or(1)),
            ModelName::Laurent => {
                let symbol = self.symbol.as_ref().ok_or_else(|| {
                    src.error(key, format!("{key}.symbol is required for model Laurent"))
                })?;
                let mut coeffs = BTreeMap::new();
                for (offset, value) in symbol {
                    let m: i64 = offset.trim().parse().map_err(|_| {
                        src.error(
                            &format!("{key}.symbol.{offset}"),
                            format!("symbol offset {offset:?} is not an integer"),
                        )
                    })?;
                    coeffs.insert(m, value.0);
                }
                if coeffs.is_empty() {
                    return Err(src.error(&at("symbol"), "symbol must have at least one entry"));
                }
                laurent_from_symbol(&coeffs)
            }
            ModelName::LaurentGeometric => {
                let c = require(self.c, "c")?;
                laurent_geometric(c).map_err(|e| numerical("c", e))?
            }
            ModelName::Jaffard => {
                let s = require(self.s, "s")?;
                jaffard_synthetic(
                    s,
                    self.amplitude.unwrap_or(1.0),
                    seed,
                    self.dim.unwrap_or(1),
                    self.hermitian.unwrap_or(false),
                )
                .map_err(|e| numerical("s", e))?
            }
            ModelName::Channel => {
                let pulse = self.pulse.as_deref().unwrap_or(&[1.0]);
                let channel = self.channel.as_deref().ok_or_else(|| {
                    src.error(key, format!("{key}.channel is required for model Channel"))
                })?;
                let (t, r) = (self.t.unwrap_or(1), self.r.unwrap_or(1));
                match self.decay {
                    Some(rate) => channel_matrix_with_decay(pulse, channel, t, r, rate),
                    None => channel_matrix(pulse, channel, t, r),
                }
                .map_err(|e| numerical("channel", e))?
            }
        };
        Ok(match self.shift {
            Some(Scalar(z)) => model.shifted(z),
            None => model,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsName {
    Unit,
    Power,
    Sparse,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub k: Vec<i64>,
    pub value: Scalar,
}

fn sparse(
    dim: usize,
    entries: &[Entry],
    src: &Source,
    path: &str,
) -> Result<SparseVector, CliError> {
    let mut x = SparseVector::zeros(dim);
    for (i, e) in entries.iter().enumerate() {
        if e.k.len() != dim {
            return Err(src.error(
                &format!("{path}[{i}].k"),
                format!(
                    "index {:?} has {} coordinates, the model has {dim}",
                    e.k,
                    e.k.len()
                ),
            ));
        }
        x.insert(&e.k, x.get(&e.k) + e.value.0);
    }
    Ok(x)
}

/// A named right-hand side recipe.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsConfig {
    pub name: RhsName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<i64>>,
    #[serde(
        default,
        deserialize_with = "opt_f64_lenient",
        skip_serializing_if = "Option::is_none"
    )]
    pub s: Option<f64>,
    #[serde(
        default,
        deserialize_with = "opt_f64_lenient",
        skip_serializing_if = "Option::is_none"
    )]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<Entry>>,
}

impl RhsConfig {
    pub fn build(&self, src: &Source, dim: usize) -> Result<Rhs, CliError> {
        let allowed: &[&str] = match self.name {
            RhsName::Unit => &["k"],
            RhsName::Power => &["s", "amplitude"],
            RhsName::Sparse => &["entries"],
        };
        let set = [
            ("k", self.k.is_some()),
            ("s", self.s.is_some()),
            ("amplitude", self.amplitude.is_some()),
            ("entries", self.entries.is_some()),
        ];
        for (field, on) in set {
            if on && !allowed.contains(&field) {
                return Err(src.error(
                    &format!("rhs.{field}"),
                    format!("rhs.{field} does not apply to rhs {:?}", self.name),
                ));
            }
        }
        match self.name {
            RhsName::Unit => {
                let k = self.k.clone().unwrap_or_else(|| vec![0; dim]);
                let e = [Entry {
                    k,
                    value: Scalar(C64::new(1.0, 0.0)),
                }];
                Ok(Rhs::Sparse(sparse(dim, &e, src, "rhs.k")?))
            }
            RhsName::Power => {
                let s = self
                    .s
                    .ok_or_else(|| src.error("rhs", "rhs.s is required for rhs Power"))?;
                if !(s > 0.0) {
                    return Err(src.error("rhs.s", format!("rhs.s = {s} must be positive")));
                }
                Ok(Rhs::Power {
                    dim,
                    s,
                    amplitude: self.amplitude.unwrap_or(1.0),
                })
            }
            RhsName::Sparse => {
                let entries = self
                    .entries
                    .as_ref()
                    .ok_or_else(|| src.error("rhs", "rhs.entries is required for rhs Sparse"))?;
                Ok(Rhs::Sparse(sparse(dim, entries, src, "rhs.entries")?))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    Symmetric,
    Nonsymmetric,
}

/// Row cube rule of the non-symmetric pipeline: `r = factor * n`,
/// `r = n + margin`, or the default schedule when neither is given.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub kind: PipelineKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<RowsConfig>,
    #[serde(default)]
    pub backend: Backend,
    /// the pipeline is expected to fail (e.g. singular sections)
    #[serde(default)]
    pub expect_failure: bool,
}

impl PipelineConfig {
    pub fn pipeline(
        &self,
        src: &Source,
        path: &str,
        alpha: Option<f64>,
    ) -> Result<Pipeline, CliError> {
        match self.kind {
            PipelineKind::Symmetric => {
                if self.rows.is_some() {
                    return Err(src.error(
                        &format!("{path}.rows"),
                        "rows only apply to the nonsymmetric pipeline",
                    ));
                }
                Ok(Pipeline::Symmetric)
            }
            PipelineKind::Nonsymmetric => {
                let rows = self.rows.clone().unwrap_or_default();
                let rule = match (rows.factor, rows.margin) {
                    (Some(_), Some(_)) => {
                        return Err(src.error(
                            &format!("{path}.rows.margin"),
                            "give either rows.factor or rows.margin, not both",
                        ))
                    }
                    (Some(0), None) => {
                        return Err(src.error(
                            &format!("{path}.rows.factor"),
                            "rows.factor must be at least 1",
                        ))
                    }
                    (Some(factor), None) => RowRule::Factor { factor },
                    (None, Some(margin)) => RowRule::Margin { margin },
                    (None, None) => RowRule::Schedule { alpha },
                };
                Ok(Pipeline::Nonsymmetric {
                    rows: rule,
                    backend: self.backend,
                })
            }
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    /// known solution
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<Vec<Entry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_n: Option<usize>,
}

impl ReferenceConfig {
    pub fn build(&self, src: &Source, dim: usize) -> Result<Reference, CliError> {
        match &self.exact {
            Some(entries) => {
                if self.factor.is_some() || self.max_n.is_some() {
                    return Err(src.error(
                        "reference.exact",
                        "an exact reference takes no factor or max_n",
                    ));
                }
                Ok(Reference::Exact(sparse(
                    dim,
                    entries,
                    src,
                    "reference.exact",
                )?))
            }
            None => {
                let factor = self.factor.unwrap_or(4);
                if factor < 2 {
                    return Err(
                        src.error("reference.factor", "reference.factor must be at least 2")
                    );
                }
                Ok(Reference::Section {
                    factor,
                    max_n: self.max_n.unwrap_or(1024),
                })
            }
        }
    }
}

/// Config of the `run` subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub rhs: RhsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PipelineConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pipelines: Vec<PipelineConfig>,
    pub ns: Vec<usize>,
    /// row schedule exponent for nonsymmetric pipelines without explicit rows
    #[serde(
        default,
        deserialize_with = "opt_f64_lenient",
        skip_serializing_if = "Option::is_none"
    )]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_space: Option<SpaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_space: Option<SpaceSpec>,
    /// algebra for the uniform inverse trace
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<AlgebraKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

/// A validated experiment, ready to run.
#[derive(Debug)]
pub struct Experiment {
    pub model: MatrixModel,
    pub rhs: Rhs,
    pub pipelines: Vec<(Pipeline, bool)>,
    pub ns: Vec<usize>,
    pub in_space: SpaceSpec,
    pub out_space: SpaceSpec,
    pub trace: Option<AlgebraKind>,
    pub reference: Reference,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

fn check_space(src: &Source, key: &str, space: &SpaceSpec, dim: usize) -> Result<(), CliError> {
    space
        .validate()
        .map_err(|e| src.error(key, format!("{key}: {e}")))?;
    if space.m.dim != dim {
        return Err(src.error(
            &format!("{key}.m.dim"),
            format!("{key} has dimension {}, the model has {dim}", space.m.dim),
        ));
    }
    Ok(())
}

fn check_algebra(src: &Source, path: &str, kind: &AlgebraKind, dim: usize) -> Result<(), CliError> {
    let v = match kind {
        AlgebraKind::Jaffard { s } => {
            if !(*s >= 0.0) {
                return Err(src.error(
                    path,
                    format!("jaffard exponent s = {s} must be nonnegative"),
                ));
            }
            return Ok(());
        }
        AlgebraKind::Av { v } | AlgebraKind::Av1 { v } | AlgebraKind::Cv { v } => v,
    };
    v.validate().map_err(|e| src.error(path, e.to_string()))?;
    if v.dim != dim {
        return Err(src.error(
            path,
            format!(
                "algebra weight has dimension {}, the model has {dim}",
                v.dim
            ),
        ));
    }
    Ok(())
}

fn check_ns(src: &Source, ns: &[usize]) -> Result<(), CliError> {
    if ns.is_empty() {
        return Err(src.error("ns", "ns must not be empty"));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(src.error("ns", "ns must be strictly increasing"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(src: &Source) -> Result<(Self, Experiment), CliError> {
        let cfg: ExperimentConfig = src.parse()?;
        let exp = cfg.validate(src)?;
        Ok((cfg, exp))
    }

    pub fn validate(&self, src: &Source) -> Result<Experiment, CliError> {
        check_ns(src, &self.ns)?;
        let model = self.model.build(src, "model", self.seed)?;
        let dim = model.dim();
        let rhs = self.rhs.build(src, dim)?;
        let configs: Vec<(String, &PipelineConfig)> =
            match (&self.pipeline, self.pipelines.is_empty()) {
                (Some(_), false) => {
                    return Err(
                        src.error("pipelines", "give either pipeline or pipelines, not both")
                    )
                }
                (Some(p), true) => vec![("pipeline".to_string(), p)],
                (None, false) => self
                    .pipelines
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (format!("pipelines[{i}]"), p))
                    .collect(),
                (None, true) => {
                    return Err(src.error("", "a pipeline (or a pipelines list) is required"))
                }
            };
        let mut pipelines = Vec::new();
        for (path, p) in configs {
            pipelines.push((p.pipeline(src, &path, self.alpha)?, p.expect_failure));
        }
        if let Some(alpha) = self.alpha {
            if !(alpha >= 1.0) {
                return Err(src.error("alpha", format!("alpha = {alpha} must be at least 1")));
            }
        }
        let in_space = self.in_space.clone().unwrap_or_else(|| SpaceSpec::l2(dim));
        let out_space = self.out_space.clone().unwrap_or_else(|| SpaceSpec::l2(dim));
        check_space(src, "in_space", &in_space, dim)?;
        check_space(src, "out_space", &out_space, dim)?;
        if let Some(kind) = &self.algebra {
            check_algebra(src, "algebra", kind, dim)?;
        }
        let reference = self.reference.clone().unwrap_or_default().build(src, dim)?;
        Ok(Experiment {
            model,
            rhs,
            pipelines,
            ns: self.ns.clone(),
            in_space,
            out_space,
            trace: self.algebra.clone(),
            reference,
            output_dir: self.output_dir.clone(),
            seed: self.seed,
        })
    }
}

/// Config of the `norms` subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsConfig {
    pub model: ModelConfig,
    pub algebras: Vec<AlgebraKind>,
    pub ns: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl NormsConfig {
    pub fn load(src: &Source) -> Result<(Self, MatrixModel), CliError> {
        let cfg: NormsConfig = src.parse()?;
        check_ns(src, &cfg.ns)?;
        let model = cfg.model.build(src, "model", cfg.seed)?;
        if cfg.algebras.is_empty() {
            return Err(src.error("algebras", "algebras must not be empty"));
        }
        for (i, kind) in cfg.algebras.iter().enumerate() {
            check_algebra(src, &format!("algebras[{i}]"), kind, model.dim())?;
        }
        Ok((cfg, model))
    }
}

fn default_radius() -> usize {
    12
}

fn default_subconv_radius() -> usize {
    4
}

fn default_grs_steps() -> usize {
    1 << 20
}

fn default_bd_x() -> Vec<i64> {
    vec![1, 2]
}

fn default_checkpoints() -> Vec<u64> {
    vec![1_000, 10_000, 100_000, 1_000_000]
}

/// One weight probed by `weights-check`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightProbe {
    pub label: String,
    pub v: WeightSpec,
    /// moderate weight checked against `v`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<WeightSpec>,
    /// cube radius of the submultiplicativity and moderateness probes
    #[serde(default = "default_radius")]
    pub radius: usize,
    #[serde(default = "default_subconv_radius")]
    pub subconvolutive_radius: usize,
    /// GRS direction (defaults to the first unit vector)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grs_direction: Option<Vec<i64>>,
    #[serde(default = "default_grs_steps")]
    pub grs_steps: usize,
    #[serde(default = "default_bd_x")]
    pub beurling_domar_x: Vec<i64>,
    #[serde(default = "default_checkpoints")]
    pub beurling_domar_checkpoints: Vec<u64>,
}

/// Config of the `weights-check` subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub weights: Vec<WeightProbe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl WeightsConfig {
    pub fn load(src: &Source) -> Result<Self, CliError> {
        let cfg: WeightsConfig = src.parse()?;
        if cfg.weights.is_empty() {
            return Err(src.error("weights", "weights must not be empty"));
        }
        for (i, p) in cfg.weights.iter().enumerate() {
            let at = |key: &str| {
                src.error(
                    &format!("weights[{i}].{key}"),
                    format!("weight {:?}: invalid {key}", p.label),
                )
            };
            p.v.validate().map_err(|e| {
                src.error(
                    &format!("weights[{i}].v"),
                    format!("weight {:?}: {e}", p.label),
                )
            })?;
            if let Some(m) = &p.m {
                m.validate().map_err(|e| {
                    src.error(
                        &format!("weights[{i}].m"),
                        format!("weight {:?}: {e}", p.label),
                    )
                })?;
                if m.dim != p.v.dim {
                    return Err(at("m"));
                }
            }
            if let Some(k) = &p.grs_direction {
                if k.len() != p.v.dim || k.iter().all(|&x| x == 0) {
                    return Err(at("grs_direction"));
                }
            }
            if p.grs_steps < 4 {
                return Err(at("grs_steps"));
            }
            if p.beurling_domar_checkpoints
                .windows(2)
                .any(|w| w[0] >= w[1])
                || p.beurling_domar_checkpoints.is_empty()
            {
                return Err(at("beurling_domar_checkpoints"));
            }
        }
        Ok(cfg)
    }
}
