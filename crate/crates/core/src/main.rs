use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use slipflow::boundary::{self, default_samples, equivalence_check};
use slipflow::experiments::inviscid_limit_campaign;
use slipflow::field::{catalog_field, CatalogParams, Domain, CATALOG_NAMES};
use slipflow::geometry::{self, curvatures, SurfaceGeometry, Vec3};
use slipflow::identities::{self, identity_corpus, Resolution};
use slipflow::io::config::{surface_from, ConfigDocument};
use slipflow::io::{self, load_config, Format, Snapshot};
use slipflow::solver::{energy_balance_check, run_observed};
use slipflow::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "slipflow", version, about = "Navier-slip boundary geometry, identities and channel flow experiments")]
struct Cli {
    /// INI configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for files
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for catalog fields (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress the JSON summary on stdout
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normal, shape operator and curvatures at a surface point
    Geom {
        #[arg(long, default_value = "sphere")]
        surface: String,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        semi_axes: Option<Vec<f64>>,
        /// Point on the surface (default: a few sample points)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Option<Vec<f64>>,
    },
    /// Boundary-condition equivalence and residuals on a surface
    BcCheck {
        #[arg(long, default_value = "sphere")]
        surface: String,
        #[arg(long, default_value_t = 1.0)]
        zeta: f64,
        /// Also report residuals of this catalog field
        #[arg(long)]
        field: Option<String>,
    },
    /// Integral identities on a corpus of fields
    Identity {
        #[arg(long, value_enum, default_value_t = IdentityKind::Divcurl)]
        check: IdentityKind,
        #[arg(long, default_value = "sphere")]
        surface: String,
        #[arg(long, default_value = "default")]
        corpus: String,
        #[arg(long, default_value_t = 0)]
        order: usize,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long, default_value_t = 48)]
        resolution: usize,
    },
    /// Persistence criterion for a pair of catalog fields at a boundary point
    Persistence {
        #[arg(long, default_value = "rigid_rotation")]
        u0: String,
        #[arg(long, default_value = "shear_z")]
        omega0: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0,1")]
        x0: Vec<f64>,
        #[arg(long, default_value = "sphere")]
        surface: String,
    },
    /// Integrate the channel equations described by the config
    Simulate {
        /// Write a snapshot at every save point
        #[arg(long)]
        snapshots: bool,
    },
    /// Run the viscosity-ladder campaign described by the config
    InviscidLimit,
    /// List catalog fields and surfaces
    Catalog,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum IdentityKind {
    Divcurl,
    Ratio,
    Vector,
}

struct Ctx {
    config: ConfigDocument,
    out: Option<PathBuf>,
    seed: Option<u64>,
    quiet: bool,
}

impl Ctx {
    fn emit(&self, value: &impl Serialize) -> Result<()> {
        if !self.quiet {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{}", io::to_json(value)?) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
        Ok(())
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: Some(dir.clone()), source: e })?;
        Ok(dir)
    }
}

fn vec3(v: &[f64], what: &str) -> Result<Vec3> {
    match v {
        [a, b, c] => Ok(Vec3::new(*a, *b, *c)),
        _ => Err(Error::ConfigInvalid(format!("{what} needs three comma-separated reals"))),
    }
}

fn domain_for(surface: &SurfaceGeometry) -> Result<Domain> {
    match *surface {
        SurfaceGeometry::UnitSphere => Ok(Domain::unit_ball()),
        SurfaceGeometry::Sphere { radius } => Ok(Domain::Ball { radius }),
        SurfaceGeometry::FlatWall { .. } => Ok(Domain::channel_2pi()),
        SurfaceGeometry::Ellipsoid { .. } => {
            Err(Error::ConfigInvalid("volume identities are available on balls and the channel".into()))
        }
    }
}

fn geom(ctx: &Ctx, surface: &SurfaceGeometry, point: Option<Vec3>) -> Result<()> {
    let points = match point {
        Some(p) => vec![p],
        None => default_samples(surface).into_iter().take(4).collect(),
    };
    let mut out = Vec::new();
    for x in points {
        let n = geometry::normal(surface, &x)?;
        let frame = geometry::TangentFrame::at(surface, &x)?;
        let s1 = geometry::shape_operator(surface, &x, &frame.e1)?;
        let s2 = geometry::shape_operator(surface, &x, &frame.e2)?;
        let c = curvatures(surface, &x)?;
        out.push(json!({
            "point": [x.x, x.y, x.z],
            "normal": [n.x, n.y, n.z],
            "shape_operator_e1": [s1.x, s1.y, s1.z],
            "shape_operator_e2": [s2.x, s2.y, s2.z],
            "gauss_curvature": c.gauss,
            "mean_curvature": c.mean,
        }));
    }
    ctx.emit(&json!({ "surface": surface.name(), "points": out }))
}

fn bc_check(ctx: &Ctx, surface: &SurfaceGeometry, zeta: f64, field: Option<&str>) -> Result<()> {
    let samples = default_samples(surface);
    let corpus = boundary::default_corpus(surface, zeta);
    let outcome = equivalence_check(surface, zeta, &corpus, &samples)?;
    let mut residuals = Vec::new();
    if let Some(name) = field {
        let u = catalog_field(name, &ctx.config.catalog_params(ctx.seed)?)?;
        residuals.push(boundary::kinematic_residual(&u, surface, &samples)?);
        residuals.push(boundary::navier_classical_residual(&u, surface, zeta, &samples)?);
        residuals.push(boundary::slip_type_residual(&u, surface, &samples)?);
    }
    ctx.emit(&json!({
        "surface": surface.name(),
        "zeta": zeta,
        "corpus_size": corpus.len(),
        "equivalence": outcome,
        "residuals": residuals,
    }))
}

fn identity(ctx: &Ctx, kind: IdentityKind, surface: &SurfaceGeometry, corpus: &str, order: usize, zeta: Option<f64>, n: usize) -> Result<()> {
    let domain = domain_for(surface)?;
    let fields = match corpus {
        "default" => identity_corpus(&domain, zeta),
        name => vec![catalog_field(name, &ctx.config.catalog_params(ctx.seed)?)?],
    };
    let res = Resolution { volume: n, ..Resolution::default() };
    let mut reports = Vec::new();
    for (i, u) in fields.iter().enumerate() {
        match kind {
            IdentityKind::Divcurl => reports.push(identities::divcurl_base_check(u, &domain, &res)?),
            IdentityKind::Ratio => reports.push(identities::divcurl_ratio(u, &domain, order, zeta, &res)?),
            IdentityKind::Vector => {
                let w = &fields[(i + 1) % fields.len()];
                reports.extend(identities::vector_identity_checks(u, w, &domain, &res));
            }
        }
    }
    let check = format!("{kind:?}").to_lowercase();
    if kind == IdentityKind::Ratio {
        let rho = reports.iter().filter_map(|r| r.term("rho")).fold(0.0, f64::max);
        return ctx.emit(&json!({ "check": check, "order": order, "max_rho": rho, "reports": reports }));
    }
    let worst = reports.iter().map(|r| r.rel_residual).fold(0.0, f64::max);
    ctx.emit(&json!({ "check": check, "max_rel_residual": worst, "reports": reports }))
}

fn persistence(ctx: &Ctx, u0: &str, omega0: &str, x0: Vec3, surface: &SurfaceGeometry) -> Result<()> {
    let params: CatalogParams = ctx.config.catalog_params(ctx.seed)?;
    let u = catalog_field(u0, &params)?;
    let w = catalog_field(omega0, &params)?;
    let verdict = identities::persistence_check(&u, &w, surface, &x0)?;
    ctx.emit(&verdict)
}

fn simulate(ctx: &Ctx, snapshots: bool) -> Result<()> {
    let cfg = ctx.config.sim_config(ctx.seed)?;
    let dir = ctx.out_dir()?;
    let mut last = None;
    let report = run_observed(&cfg, |s| {
        let snap = Snapshot::from_state(s, cfg.nu, cfg.zeta);
        if snapshots {
            io::write_snapshot(&snap, &dir.join(format!("u_{:06}.vfld", s.step_count)))?;
        }
        last = Some(snap);
        Ok(())
    })?;
    if let Some(snap) = &last {
        io::write_snapshot(snap, &dir.join("final.vfld"))?;
    }
    io::emit_report(&report, Format::Csv, &dir.join("energy.csv"))?;
    io::emit_report(&report, Format::Json, &dir.join("energy.json"))?;
    let balance = energy_balance_check(&report);
    ctx.emit(&json!({
        "steps": report.rows.last().map(|r| (r.t / report.dt).round()),
        "final": report.rows.last(),
        "energy_balance": balance,
        "max_divergence": report.max_divergence,
        "max_wall_normal": report.max_wall_normal,
        "initial_navier_residual": report.initial_navier_residual,
        "out": dir,
    }))
}

fn inviscid_limit(ctx: &Ctx) -> Result<()> {
    let spec = ctx.config.campaign_spec(ctx.seed)?;
    let result = inviscid_limit_campaign(&spec)?;
    let dir = ctx.out_dir()?;
    io::write_campaign_outputs(&result, &dir)?;
    ctx.emit(&json!({
        "fits": result.fits,
        "strictly_decreasing": result.strictly_decreasing,
        "t0_max_error": result.t0_max_error,
        "nu_star": result.nu_star,
        "gradient_uniform": result.gradient.uniform,
        "sqrt_regime": result.sqrt_regime,
        "failures": result.failures,
        "out": dir,
    }))
}

fn catalog(ctx: &Ctx) -> Result<()> {
    ctx.emit(&json!({
        "fields": CATALOG_NAMES,
        "surfaces": ["sphere", "unit_sphere", "ellipsoid", "flat_wall"],
    }))
}

fn surface_arg(ctx: &Ctx, name: &str, radius: Option<f64>, semi_axes: Option<&[f64]>) -> Result<SurfaceGeometry> {
    surface_from(
        name,
        radius.or(ctx.config.real("radius")),
        semi_axes.or(ctx.config.reals("semi_axes")),
        ctx.config.real("wall_z"),
    )
}

fn dispatch(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => load_config(Path::new(p))?,
        None => ConfigDocument::default(),
    };
    let ctx = Ctx { config, out: cli.out, seed: cli.seed, quiet: cli.quiet };
    match cli.command {
        Command::Geom { surface, radius, semi_axes, point } => {
            let s = surface_arg(&ctx, &surface, radius, semi_axes.as_deref())?;
            let p = point.map(|p| vec3(&p, "--point")).transpose()?;
            geom(&ctx, &s, p)
        }
        Command::BcCheck { surface, zeta, field } => {
            let s = surface_arg(&ctx, &surface, None, None)?;
            bc_check(&ctx, &s, zeta, field.as_deref())
        }
        Command::Identity { check, surface, corpus, order, zeta, resolution } => {
            let s = surface_arg(&ctx, &surface, None, None)?;
            identity(&ctx, check, &s, &corpus, order, zeta, resolution)
        }
        Command::Persistence { u0, omega0, x0, surface } => {
            let s = surface_arg(&ctx, &surface, None, None)?;
            persistence(&ctx, &u0, &omega0, vec3(&x0, "--x0")?, &s)
        }
        Command::Simulate { snapshots } => simulate(&ctx, snapshots),
        Command::InviscidLimit => inviscid_limit(&ctx),
        Command::Catalog => catalog(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
