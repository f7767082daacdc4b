//! INI-style configuration: `[section]` headers, `key = value` lines,
//! `#` comments. Every key is registered with a type; unknown keys and
//! ill-typed values are rejected at parse time.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiments::CampaignSpec;
use crate::field::{CatalogParams, ChannelGrid, Tangency};
use crate::geometry::{SurfaceGeometry, Vec3};
use crate::solver::{InitialData, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Str,
    Int,
    Real,
    RealList,
}

impl ValueKind {
    fn describe(self) -> &'static str {
        match self {
            ValueKind::Str => "a string",
            ValueKind::Int => "an integer",
            ValueKind::Real => "a real number",
            ValueKind::RealList => "a comma-separated list of reals",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Real(f64),
    RealList(Vec<f64>),
}

/// Known keys and their types.
pub const KEYS: &[(&str, ValueKind)] = &[
    // grid
    ("nx", ValueKind::Int),
    ("ny", ValueKind::Int),
    ("nz", ValueKind::Int),
    ("lx", ValueKind::Real),
    ("ly", ValueKind::Real),
    // solver
    ("nu", ValueKind::Real),
    ("zeta", ValueKind::Real),
    ("dt", ValueKind::Real),
    ("t_final", ValueKind::Real),
    ("r", ValueKind::Int),
    ("save_every", ValueKind::Int),
    ("cfl", ValueKind::Real),
    ("normalize_order", ValueKind::Int),
    // initial data
    ("field", ValueKind::Str),
    ("seed", ValueKind::Int),
    ("degree", ValueKind::Int),
    ("axis", ValueKind::RealList),
    ("tangency", ValueKind::Str),
    ("snapshot", ValueKind::Str),
    // campaign
    ("nu_ladder", ValueKind::RealList),
    ("error_orders", ValueKind::RealList),
    // geometry and checks
    ("surface", ValueKind::Str),
    ("radius", ValueKind::Real),
    ("semi_axes", ValueKind::RealList),
    ("wall_z", ValueKind::Real),
    ("samples", ValueKind::Int),
    ("check", ValueKind::Str),
    ("corpus", ValueKind::Str),
    ("order", ValueKind::Int),
    ("resolution", ValueKind::Int),
    ("point", ValueKind::RealList),
    ("u0", ValueKind::Str),
    ("omega0", ValueKind::Str),
    ("x0", ValueKind::RealList),
];

pub fn key_kind(key: &str) -> Option<ValueKind> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, t)| *t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: Value,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    /// Empty for entries before the first header.
    pub name: String,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigDocument {
    pub sections: Vec<Section>,
    pub source: Option<PathBuf>,
}

fn parse_value(key: &str, raw: &str, kind: ValueKind) -> Result<Value> {
    let mismatch = || Error::TypeMismatch { key: key.to_string(), expected: kind.describe(), found: raw.to_string() };
    let real = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    match kind {
        ValueKind::Str => Ok(Value::Str(raw.to_string())),
        ValueKind::Int => raw.parse::<i64>().map(Value::Int).map_err(|_| mismatch()),
        ValueKind::Real => real(raw).map(Value::Real).ok_or_else(mismatch),
        ValueKind::RealList => raw
            .split(',')
            .map(|s| real(s).ok_or_else(mismatch))
            .collect::<Result<Vec<_>>>()
            .map(Value::RealList),
    }
}

/// Parse configuration text.
pub fn parse_config(text: &str) -> Result<ConfigDocument> {
    let mut doc = ConfigDocument::default();
    let mut current = Section { name: String::new(), entries: Vec::new() };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .filter(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'))
                .ok_or_else(|| Error::SyntaxError { line, message: format!("malformed section header `{content}`") })?;
            let done = std::mem::replace(&mut current, Section { name: name.to_string(), entries: Vec::new() });
            if !done.name.is_empty() || !done.entries.is_empty() {
                doc.sections.push(done);
            }
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::SyntaxError { line, message: format!("expected `key = value`, found `{content}`") })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::SyntaxError { line, message: "empty key".into() });
        }
        if value.is_empty() {
            return Err(Error::SyntaxError { line, message: format!("missing value for `{key}`") });
        }
        let kind = key_kind(key).ok_or_else(|| Error::UnknownKey { line, key: key.to_string() })?;
        current.entries.push(Entry { key: key.to_string(), value: parse_value(key, value, kind)?, line });
    }
    if !current.name.is_empty() || !current.entries.is_empty() {
        doc.sections.push(current);
    }
    Ok(doc)
}

/// Read and parse a configuration file.
pub fn load_config(path: &Path) -> Result<ConfigDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut doc = parse_config(&text)?;
    doc.source = Some(path.to_path_buf());
    Ok(doc)
}

impl ConfigDocument {
    /// Last value given for `key`, in any section.
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.sections.iter().flat_map(|s| &s.entries).filter(|e| e.key == key).last().map(|e| &e.value)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn real(&self, key: &str) -> Option<f64> {
        match self.get(key)? {
            Value::Real(v) => Some(*v),
            Value::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn int(&self, key: &str) -> Option<i64> {
        match self.get(key)? {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn string(&self, key: &str) -> Option<&str> {
        match self.get(key)? {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn reals(&self, key: &str) -> Option<&[f64]> {
        match self.get(key)? {
            Value::RealList(v) => Some(v),
            _ => None,
        }
    }

    pub fn require(&self, keys: &[&str]) -> Result<()> {
        match keys.iter().find(|k| !self.contains(k)) {
            Some(k) => Err(Error::MissingKey(k.to_string())),
            None => Ok(()),
        }
    }

    /// Non-negative integer, or a `TypeMismatch`.
    pub fn count(&self, key: &str) -> Result<Option<usize>> {
        match self.int(key) {
            None => Ok(None),
            Some(v) if v >= 0 => Ok(Some(v as usize)),
            Some(v) => Err(Error::TypeMismatch { key: key.into(), expected: "a non-negative integer", found: v.to_string() }),
        }
    }

    fn vec3(&self, key: &str) -> Result<Option<Vec3>> {
        match self.reals(key) {
            None => Ok(None),
            Some([a, b, c]) => Ok(Some(Vec3::new(*a, *b, *c))),
            Some(v) => Err(Error::TypeMismatch { key: key.into(), expected: "three reals", found: format!("{v:?}") }),
        }
    }

    /// Surface from `surface`, `radius`, `semi_axes`, `wall_z`
    /// (default: unit sphere).
    pub fn surface(&self) -> Result<SurfaceGeometry> {
        let name = self.string("surface").unwrap_or("sphere");
        surface_from(name, self.real("radius"), self.reals("semi_axes"), self.real("wall_z"))
    }

    pub fn catalog_params(&self, seed_override: Option<u64>) -> Result<CatalogParams> {
        let mut p = CatalogParams::default();
        if let Some(axis) = self.vec3("axis")? {
            p.axis = axis;
        }
        if let Some(seed) = self.count("seed")? {
            p.seed = seed as u64;
        }
        if let Some(seed) = seed_override {
            p.seed = seed;
        }
        if let Some(d) = self.count("degree")? {
            p.degree = d as u32;
        }
        if let Some(z) = self.real("zeta") {
            p.zeta = z;
        }
        p.tangency = match self.string("tangency").unwrap_or("none") {
            "none" => Tangency::None,
            "channel" | "walls" => Tangency::ChannelWalls,
            _ => Tangency::Surface(self.surface()?),
        };
        Ok(p)
    }

    /// Simulation settings; missing keys keep their defaults.
    pub fn sim_config(&self, seed_override: Option<u64>) -> Result<SimConfig> {
        let nx = self.count("nx")?.unwrap_or(32);
        let ny = self.count("ny")?.unwrap_or(nx);
        let nz = self.count("nz")?.unwrap_or(33);
        let tau = std::f64::consts::TAU;
        let grid = ChannelGrid::new(nx, ny, nz, self.real("lx").unwrap_or(tau), self.real("ly").unwrap_or(tau))?;
        let initial = match self.string("snapshot") {
            Some(path) => {
                let snap = super::snapshot::read_snapshot(Path::new(path))?;
                InitialData::Spectral(snap.to_field()?)
            }
            None => InitialData::Catalog {
                name: self.string("field").unwrap_or("sheared_robin").to_string(),
                params: self.catalog_params(seed_override)?,
            },
        };
        let mut c = SimConfig::new(grid, initial);
        if let Some(v) = self.real("nu") {
            c.nu = v;
        }
        if let Some(v) = self.real("zeta") {
            c.zeta = v;
        }
        if let Some(v) = self.real("dt") {
            c.dt = v;
        }
        if let Some(v) = self.real("t_final") {
            c.t_final = v;
        }
        if let Some(v) = self.count("r")? {
            c.r = v;
        }
        if let Some(v) = self.count("save_every")? {
            c.save_every = v;
        }
        if let Some(v) = self.real("cfl") {
            c.cfl_limit = v;
        }
        c.normalize_energy_order = self.count("normalize_order")?;
        c.validate()?;
        Ok(c)
    }

    /// Campaign settings on top of [`CampaignSpec::default_campaign`].
    pub fn campaign_spec(&self, seed_override: Option<u64>) -> Result<CampaignSpec> {
        let mut spec = CampaignSpec::default_campaign();
        let has_sim_keys = ["nx", "ny", "nz", "dt", "t_final", "r", "save_every", "field", "snapshot", "normalize_order"]
            .iter()
            .any(|k| self.contains(k));
        if has_sim_keys {
            let mut base = self.sim_config(seed_override)?;
            if !self.contains("normalize_order") {
                base.normalize_energy_order = spec.base.normalize_energy_order;
            }
            spec.base = base;
        } else if let (Some(seed), InitialData::Catalog { params, .. }) = (seed_override, &mut spec.base.initial) {
            params.seed = seed;
        }
        if let Some(l) = self.reals("nu_ladder") {
            spec.nu_ladder = l.to_vec();
        }
        if let Some(z) = self.real("zeta") {
            spec.zeta = z;
        }
        if let Some(orders) = self.reals("error_orders") {
            spec.error_orders = orders
                .iter()
                .map(|&v| {
                    if v >= 0.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(Error::TypeMismatch {
                            key: "error_orders".into(),
                            expected: "non-negative integers",
                            found: v.to_string(),
                        })
                    }
                })
                .collect::<Result<_>>()?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Surface by name: `sphere` (optional radius), `unit_sphere`,
/// `ellipsoid` (semi-axes, default 1, 1.5, 2), `flat_wall` (at `wall_z`,
/// default 1, outward +z).
pub fn surface_from(name: &str, radius: Option<f64>, semi_axes: Option<&[f64]>, wall_z: Option<f64>) -> Result<SurfaceGeometry> {
    match name {
        "sphere" => Ok(SurfaceGeometry::sphere(radius.unwrap_or(1.0))),
        "unit_sphere" => Ok(SurfaceGeometry::UnitSphere),
        "ellipsoid" => match semi_axes.unwrap_or(&[1.0, 1.5, 2.0]) {
            [a, b, c] if *a > 0.0 && *b > 0.0 && *c > 0.0 => Ok(SurfaceGeometry::ellipsoid(*a, *b, *c)),
            other => Err(Error::ConfigInvalid(format!("ellipsoid needs three positive semi-axes, got {other:?}"))),
        },
        "flat_wall" | "flat" => Ok(SurfaceGeometry::flat_wall(wall_z.unwrap_or(1.0), 1)),
        other => Err(Error::ConfigInvalid(format!("unknown surface `{other}`"))),
    }
}
