//! Run configuration (plain `section.key = value` text) and run directories
//! with checksummed artifacts and a manifest written last.
//!
//! ```text
//! # barrier run
//! potential.kind = barrier
//! potential.height = 1
//! potential.half_width = 1
//! evolution.eta = 0.08
//! ```
//!
//! Every key is optional; omitted keys take the defaults of [`RunConfig::default`].

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::evolve::{DataShape, Sign};
use crate::grid::Grid;
use crate::potentials::Potential;

/// Round-trip safe decimal with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Barrier { height: f64, half_width: f64 },
    Gaussian { amplitude: f64, width: f64 },
    Zero,
    Sampled { file: PathBuf },
}

impl PotentialSpec {
    /// Sample on `grid`; a sampled file must already match the grid.
    pub fn build(&self, grid: &Grid, allow_signed: bool) -> Result<Potential> {
        let v = match self {
            PotentialSpec::Barrier { height, half_width } => Potential::barrier(*height, *half_width, grid)?,
            PotentialSpec::Gaussian { amplitude, width } => Potential::gaussian(*amplitude, *width, grid)?,
            PotentialSpec::Zero => Potential::zero(grid),
            PotentialSpec::Sampled { file } => Potential::read_csv(file, allow_signed)?,
        };
        if !v.matches(grid) {
            return Err(Error::config(format!(
                "potential.file: samples do not lie on the grid (x_half_width = {}, n_x = {})",
                grid.x_half_width(),
                grid.n_x()
            )));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub x_half_width: f64,
    pub n_x: usize,
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.x_half_width, self.n_x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolutionSpec {
    pub grid: GridSpec,
    pub t_end: f64,
    pub dt: f64,
    pub sign: Sign,
    pub eta: f64,
    pub data: DataShape,
    pub a_coeff_file: Option<PathBuf>,
    pub linear: bool,
    /// Also measure the splitting order on `[0, convergence_t]`.
    pub convergence_t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecaySpec {
    pub t_min: f64,
    pub t_max: f64,
    pub per_decade: usize,
    pub pdo_refinements: usize,
    pub pdo_beta: f64,
    pub pdo_grid: GridSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureSpec {
    /// Time at which the trilinear actions are compared.
    pub t: f64,
    /// Quadrature step of the flat identity checks (halved for the order test).
    pub lemma_step: f64,
    pub lemma_t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticsSpec {
    pub per_decade: usize,
    pub sp_t: f64,
    pub sp_k: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaSpec {
    pub epsilons: Vec<f64>,
    pub q: f64,
    pub k_min: f64,
    pub k_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub allow_signed: bool,
    pub grid: GridSpec,
    pub evolution: EvolutionSpec,
    pub decay: DecaySpec,
    pub measure: MeasureSpec,
    pub asymptotics: AsymptoticsSpec,
    pub delta: DeltaSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            potential: PotentialSpec::Barrier {
                height: 1.0,
                half_width: 1.0,
            },
            allow_signed: false,
            grid: GridSpec {
                x_half_width: 40.0,
                n_x: 2048,
            },
            evolution: EvolutionSpec {
                grid: GridSpec {
                    x_half_width: 400.0,
                    n_x: 2048,
                },
                t_end: 200.0,
                dt: 0.02,
                sign: Sign::Defocusing,
                eta: 0.08,
                data: DataShape::BandLimited { kappa: 0.9 },
                a_coeff_file: None,
                linear: false,
                convergence_t: 20.0,
            },
            decay: DecaySpec {
                t_min: 1.0,
                t_max: 200.0,
                per_decade: 10,
                pdo_refinements: 2,
                pdo_beta: 1.0,
                pdo_grid: GridSpec {
                    x_half_width: 10.0,
                    n_x: 128,
                },
            },
            measure: MeasureSpec {
                t: 1.0,
                lemma_step: 0.02,
                lemma_t: 1.0,
            },
            asymptotics: AsymptoticsSpec {
                per_decade: 12,
                sp_t: 400.0,
                sp_k: 1.0,
            },
            delta: DeltaSpec {
                epsilons: vec![0.4, 0.2, 0.1, 0.05],
                q: 2.0,
                k_min: 0.5,
                k_max: 4.0,
            },
        }
    }
}

const KEYS: &[&str] = &[
    "potential.kind",
    "potential.height",
    "potential.half_width",
    "potential.amplitude",
    "potential.width",
    "potential.file",
    "potential.allow_signed",
    "grid.x_half_width",
    "grid.n_x",
    "grid.k_half_width",
    "grid.n_k",
    "evolution.x_half_width",
    "evolution.n_x",
    "evolution.t_end",
    "evolution.dt",
    "evolution.sign",
    "evolution.eta",
    "evolution.data_shape",
    "evolution.kappa",
    "evolution.a_coeff_file",
    "evolution.linear",
    "evolution.convergence_t",
    "decay.t_min",
    "decay.t_max",
    "decay.per_decade",
    "decay.pdo_refinements",
    "decay.pdo_beta",
    "decay.pdo_x_half_width",
    "decay.pdo_n_x",
    "measure.t",
    "measure.lemma_step",
    "measure.lemma_t",
    "asymptotics.per_decade",
    "asymptotics.sp_t",
    "asymptotics.sp_k",
    "delta.epsilons",
    "delta.q",
    "delta.k_min",
    "delta.k_max",
];

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::config(format!("{key}: expected a finite number, got {s:?}"))),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.0.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse::<usize>()
                .map_err(|_| Error::config(format!("{key}: expected a non-negative integer, got {s:?}"))),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.0.get(key).map(String::as_str) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(s) => Err(Error::config(format!("{key}: expected true or false, got {s:?}"))),
        }
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(format!("{key}: must be positive, got {v}")))
    }
}

fn grid_spec(key_prefix: &str, x: f64, n: usize) -> Result<GridSpec> {
    if n < 16 || !n.is_multiple_of(2) {
        return Err(Error::config(format!("{key_prefix}.n_x: must be even and at least 16, got {n}")));
    }
    positive(&format!("{key_prefix}.x_half_width"), x)?;
    Ok(GridSpec { x_half_width: x, n_x: n })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut unknown = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                unknown.push(k.to_string());
                continue;
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::config(format!("{k}: given more than once")));
            }
        }
        if !unknown.is_empty() {
            return Err(Error::config(format!("unknown keys: {}", unknown.join(", "))));
        }
        Self::from_fields(&Fields(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn from_fields(f: &Fields) -> Result<Self> {
        let d = RunConfig::default();
        let potential = match f.str("potential.kind").unwrap_or("barrier") {
            "barrier" => {
                let height = f.f64("potential.height", 1.0)?;
                if height < 0.0 {
                    return Err(Error::config(format!("potential.height: must be >= 0, got {height}")));
                }
                let half_width = positive("potential.half_width", f.f64("potential.half_width", 1.0)?)?;
                PotentialSpec::Barrier { height, half_width }
            }
            "gaussian" => PotentialSpec::Gaussian {
                amplitude: f.f64("potential.amplitude", 1.0)?,
                width: positive("potential.width", f.f64("potential.width", 1.0)?)?,
            },
            "zero" => PotentialSpec::Zero,
            "sampled" => PotentialSpec::Sampled {
                file: PathBuf::from(
                    f.str("potential.file")
                        .ok_or_else(|| Error::config("potential.file: required for kind = sampled"))?,
                ),
            },
            other => {
                return Err(Error::config(format!(
                    "potential.kind: expected barrier, gaussian, zero or sampled, got {other:?}"
                )))
            }
        };
        let grid = grid_spec(
            "grid",
            f.f64("grid.x_half_width", d.grid.x_half_width)?,
            f.usize("grid.n_x", d.grid.n_x)?,
        )?;
        if let Some(nk) = f.str("grid.n_k") {
            if f.usize("grid.n_k", 0)? != grid.n_x {
                return Err(Error::config(format!(
                    "grid.n_k: the k-grid is the dual of the x-grid, so n_k must equal n_x = {}, got {nk}",
                    grid.n_x
                )));
            }
        }
        if f.str("grid.k_half_width").is_some() {
            let want = grid.grid()?.k_half_width();
            let got = f.f64("grid.k_half_width", want)?;
            if (got - want).abs() > 1e-9 * want {
                return Err(Error::config(format!(
                    "grid.k_half_width: fixed by the x-grid to {want}, got {got}"
                )));
            }
        }
        let eg = grid_spec(
            "evolution",
            f.f64("evolution.x_half_width", d.evolution.grid.x_half_width)?,
            f.usize("evolution.n_x", d.evolution.grid.n_x)?,
        )?;
        let t_end = f.f64("evolution.t_end", d.evolution.t_end)?;
        if t_end < 0.0 {
            return Err(Error::config(format!("evolution.t_end: must be >= 0, got {t_end}")));
        }
        let dt = positive("evolution.dt", f.f64("evolution.dt", d.evolution.dt)?)?;
        let sign = match f.str("evolution.sign").unwrap_or("defocusing") {
            "defocusing" => Sign::Defocusing,
            "focusing" => Sign::Focusing,
            s => {
                return Err(Error::config(format!(
                    "evolution.sign: expected defocusing or focusing, got {s:?}"
                )))
            }
        };
        let eta = f.f64("evolution.eta", d.evolution.eta)?;
        if eta < 0.0 {
            return Err(Error::config(format!("evolution.eta: must be >= 0, got {eta}")));
        }
        let data = match f.str("evolution.data_shape").unwrap_or("band_limited") {
            "band_limited" => DataShape::BandLimited {
                kappa: positive("evolution.kappa", f.f64("evolution.kappa", 0.9)?)?,
            },
            "gaussian" => DataShape::Gaussian,
            "odd_gaussian" => DataShape::OddGaussian,
            s => {
                return Err(Error::config(format!(
                    "evolution.data_shape: expected band_limited, gaussian or odd_gaussian, got {s:?}"
                )))
            }
        };
        let convergence_t = f.f64("evolution.convergence_t", d.evolution.convergence_t)?;
        if convergence_t < 0.0 {
            return Err(Error::config("evolution.convergence_t: must be >= 0 (0 disables)"));
        }
        let evolution = EvolutionSpec {
            grid: eg,
            t_end,
            dt,
            sign,
            eta,
            data,
            a_coeff_file: f.str("evolution.a_coeff_file").map(PathBuf::from),
            linear: f.bool("evolution.linear", false)?,
            convergence_t,
        };
        let t_min = positive("decay.t_min", f.f64("decay.t_min", d.decay.t_min)?)?;
        let t_max = f.f64("decay.t_max", d.decay.t_max)?;
        if t_max <= t_min {
            return Err(Error::config(format!("decay.t_max: must exceed decay.t_min = {t_min}")));
        }
        let per_decade = f.usize("decay.per_decade", d.decay.per_decade)?;
        if per_decade == 0 {
            return Err(Error::config("decay.per_decade: must be at least 1"));
        }
        let decay = DecaySpec {
            t_min,
            t_max,
            per_decade,
            pdo_refinements: f.usize("decay.pdo_refinements", d.decay.pdo_refinements)?,
            pdo_beta: f.f64("decay.pdo_beta", d.decay.pdo_beta)?,
            pdo_grid: grid_spec(
                "decay.pdo",
                f.f64("decay.pdo_x_half_width", d.decay.pdo_grid.x_half_width)?,
                f.usize("decay.pdo_n_x", d.decay.pdo_grid.n_x)?,
            )?,
        };
        let measure = MeasureSpec {
            t: f.f64("measure.t", d.measure.t)?,
            lemma_step: positive("measure.lemma_step", f.f64("measure.lemma_step", d.measure.lemma_step)?)?,
            lemma_t: f.f64("measure.lemma_t", d.measure.lemma_t)?,
        };
        let asymptotics = AsymptoticsSpec {
            per_decade: f.usize("asymptotics.per_decade", d.asymptotics.per_decade)?,
            sp_t: positive("asymptotics.sp_t", f.f64("asymptotics.sp_t", d.asymptotics.sp_t)?)?,
            sp_k: f.f64("asymptotics.sp_k", d.asymptotics.sp_k)?,
        };
        if asymptotics.per_decade < 8 {
            return Err(Error::config("asymptotics.per_decade: needs at least 8 snapshots per decade"));
        }
        let epsilons = match f.str("delta.epsilons") {
            None => d.delta.epsilons.clone(),
            Some(s) => s
                .split(',')
                .map(|e| {
                    e.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| *v > 0.0)
                        .ok_or_else(|| Error::config(format!("delta.epsilons: expected positive numbers, got {e:?}")))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let delta = DeltaSpec {
            epsilons,
            q: positive("delta.q", f.f64("delta.q", d.delta.q)?)?,
            k_min: f.f64("delta.k_min", d.delta.k_min)?,
            k_max: f.f64("delta.k_max", d.delta.k_max)?,
        };
        if !(delta.k_min > 0.0 && delta.k_max > delta.k_min) {
            return Err(Error::config("delta.k_min, delta.k_max: need 0 < k_min < k_max"));
        }
        Ok(RunConfig {
            potential,
            allow_signed: f.bool("potential.allow_signed", false)?,
            grid,
            evolution,
            decay,
            measure,
            asymptotics,
            delta,
        })
    }

    /// Canonical text form with every key; parses back to the same config.
    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        let mut kv = |k: &str, v: String| out.push(format!("{k} = {v}"));
        let num = |x: f64| format!("{x:?}");
        match &self.potential {
            PotentialSpec::Barrier { height, half_width } => {
                kv("potential.kind", "barrier".into());
                kv("potential.height", num(*height));
                kv("potential.half_width", num(*half_width));
            }
            PotentialSpec::Gaussian { amplitude, width } => {
                kv("potential.kind", "gaussian".into());
                kv("potential.amplitude", num(*amplitude));
                kv("potential.width", num(*width));
            }
            PotentialSpec::Zero => kv("potential.kind", "zero".into()),
            PotentialSpec::Sampled { file } => {
                kv("potential.kind", "sampled".into());
                kv("potential.file", file.display().to_string());
            }
        }
        kv("potential.allow_signed", self.allow_signed.to_string());
        kv("grid.x_half_width", num(self.grid.x_half_width));
        kv("grid.n_x", self.grid.n_x.to_string());
        let e = &self.evolution;
        kv("evolution.x_half_width", num(e.grid.x_half_width));
        kv("evolution.n_x", e.grid.n_x.to_string());
        kv("evolution.t_end", num(e.t_end));
        kv("evolution.dt", num(e.dt));
        kv(
            "evolution.sign",
            match e.sign {
                Sign::Defocusing => "defocusing",
                Sign::Focusing => "focusing",
            }
            .into(),
        );
        kv("evolution.eta", num(e.eta));
        match e.data {
            DataShape::BandLimited { kappa } => {
                kv("evolution.data_shape", "band_limited".into());
                kv("evolution.kappa", num(kappa));
            }
            DataShape::Gaussian => kv("evolution.data_shape", "gaussian".into()),
            DataShape::OddGaussian => kv("evolution.data_shape", "odd_gaussian".into()),
        }
        if let Some(p) = &e.a_coeff_file {
            kv("evolution.a_coeff_file", p.display().to_string());
        }
        kv("evolution.linear", e.linear.to_string());
        kv("evolution.convergence_t", num(e.convergence_t));
        let d = &self.decay;
        kv("decay.t_min", num(d.t_min));
        kv("decay.t_max", num(d.t_max));
        kv("decay.per_decade", d.per_decade.to_string());
        kv("decay.pdo_refinements", d.pdo_refinements.to_string());
        kv("decay.pdo_beta", num(d.pdo_beta));
        kv("decay.pdo_x_half_width", num(d.pdo_grid.x_half_width));
        kv("decay.pdo_n_x", d.pdo_grid.n_x.to_string());
        kv("measure.t", num(self.measure.t));
        kv("measure.lemma_step", num(self.measure.lemma_step));
        kv("measure.lemma_t", num(self.measure.lemma_t));
        kv("asymptotics.per_decade", self.asymptotics.per_decade.to_string());
        kv("asymptotics.sp_t", num(self.asymptotics.sp_t));
        kv("asymptotics.sp_k", num(self.asymptotics.sp_k));
        kv(
            "delta.epsilons",
            self.delta.epsilons.iter().map(|e| num(*e)).collect::<Vec<_>>().join(", "),
        );
        kv("delta.q", num(self.delta.q));
        kv("delta.k_min", num(self.delta.k_min));
        kv("delta.k_max", num(self.delta.k_max));
        out.join("\n") + "\n"
    }

    /// `a(x)` on the evolution grid, from a `x,a` CSV.
    pub fn a_coeff(&self, grid: &Grid) -> Result<Option<Vec<f64>>> {
        let Some(path) = &self.evolution.a_coeff_file else {
            return Ok(None);
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut vals = Vec::new();
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let a = line
                .split(',')
                .nth(1)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::config(format!("evolution.a_coeff_file: bad row {line:?}")))?;
            vals.push(a);
        }
        if vals.len() != grid.n_x() {
            return Err(Error::config(format!(
                "evolution.a_coeff_file: {} rows, evolution grid has {}",
                vals.len(),
                grid.n_x()
            )));
        }
        Ok(Some(vals))
    }
}

/// Tidy CSV with 17-digit numbers.
pub fn csv_table(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: String,
    pub outputs: Vec<OutputRecord>,
    /// Wall-clock seconds per stage.
    pub timings: Vec<(String, f64)>,
}

pub const MANIFEST: &str = "manifest.json";

/// A run directory. Artifacts are written as they are produced; the
/// manifest only by [`RunStore::finish`], atomically.
pub struct RunStore {
    dir: PathBuf,
    outputs: Vec<OutputRecord>,
    timings: Vec<(String, f64)>,
}

fn sha_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunStore {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let m = dir.join(MANIFEST);
        if m.exists() {
            fs::remove_file(&m).map_err(|e| Error::io(&m, e))?;
        }
        Ok(RunStore {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
            timings: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(OutputRecord {
            file: name.to_string(),
            sha256: sha_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        self.write_bytes(name, csv_table(header, rows).as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)
            .map_err(|e| Error::numerical(format!("cannot serialise {name}: {e}")))?;
        s.push('\n');
        self.write_bytes(name, s.as_bytes())
    }

    /// Run `f`, recording its wall-clock time under `label`.
    pub fn time<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push((label.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn outputs(&self) -> &[OutputRecord] {
        &self.outputs
    }

    pub fn finish(self, subcommand: &str, config: &RunConfig) -> Result<RunManifest> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.to_text(),
            outputs: self.outputs,
            timings: self.timings,
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::numerical(format!("cannot serialise manifest: {e}")))?;
        let tmp = self.dir.join(format!("{MANIFEST}.tmp"));
        fs::write(&tmp, text + "\n").map_err(|e| Error::io(&tmp, e))?;
        let dst = self.dir.join(MANIFEST);
        fs::rename(&tmp, &dst).map_err(|e| Error::io(&dst, e))?;
        Ok(manifest)
    }
}

/// Named in-memory artifact.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Write `artifacts` then the manifest. Any failure leaves no manifest.
pub fn write_report(dir: &Path, subcommand: &str, config: &RunConfig, artifacts: &[Artifact]) -> Result<RunManifest> {
    let mut store = RunStore::create(dir)?;
    for a in artifacts {
        store.write_bytes(&a.name, &a.bytes)?;
    }
    store.finish(subcommand, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse("potential.kind = barrier\npotential.height = 1\npotential.half_width = 1\n").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.grid.n_x, 2048);
        assert_eq!(c.evolution.t_end, 200.0);
    }

    #[test]
    fn validation_names_the_field() {
        let e = RunConfig::parse("grid.n_x = 0").unwrap_err();
        assert!(matches!(&e, Error::Config(m) if m.contains("grid.n_x")), "{e}");
        let e = RunConfig::parse("grid.nx = 10\nfoo.bar = 1").unwrap_err();
        assert!(matches!(&e, Error::Config(m) if m.contains("grid.nx") && m.contains("foo.bar")));
        assert!(RunConfig::parse("evolution.dt = -1").is_err());
        assert!(RunConfig::parse("grid.n_k = 1024").is_err());
        assert!(RunConfig::parse("grid.n_k = 2048").is_ok());
        assert!(RunConfig::parse("evolution.sign = sideways").is_err());
        assert!(RunConfig::parse("no equals sign").is_err());
        assert_eq!(RunConfig::parse("delta.epsilons = 0.3, 0.1").unwrap().delta.epsilons, vec![0.3, 0.1]);
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.potential = PotentialSpec::Gaussian {
            amplitude: 0.5,
            width: 1.0 / 3.0,
        };
        c.evolution.sign = Sign::Focusing;
        c.evolution.data = DataShape::OddGaussian;
        c.delta.epsilons = vec![0.3, 0.1 + 0.2];
        let again = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_text(), c.to_text());
    }

    #[test]
    fn manifest_written_last_with_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::default();
        let m = write_report(dir.path(), "none", &cfg, &[]).unwrap();
        assert!(m.outputs.is_empty());
        assert!(dir.path().join(MANIFEST).exists());

        let arts = [Artifact {
            name: "a.csv".into(),
            bytes: csv_table(&["t", "norm"], &[vec![1.0, 0.5]]).into_bytes(),
        }];
        let m1 = write_report(dir.path(), "x", &cfg, &arts).unwrap();
        let m2 = write_report(dir.path(), "x", &cfg, &arts).unwrap();
        assert_eq!(m1.outputs, m2.outputs);
        assert_eq!(m1.outputs[0].sha256.len(), 64);

        // A failing artifact leaves no manifest behind.
        let bad = [Artifact {
            name: "missing/dir.csv".into(),
            bytes: vec![1],
        }];
        assert!(write_report(dir.path(), "x", &cfg, &bad).is_err());
        assert!(!dir.path().join(MANIFEST).exists());
    }

    #[test]
    fn seventeen_digit_numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(csv_table(&["t", "norm"], &vec![vec![1.0, 2.0]; 3]).lines().count(), 4);
    }
}
