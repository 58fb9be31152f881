//! Run configuration: flat `key = value` lines with `#` comments.
//!
//! Every tracker parameter has a default; a file only lists what it changes.
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use abtrack_core::{DosUpdate, Error, PixelRect, Result, TrackerConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub frames: PathBuf,
    pub init_box: PixelRect,
    pub truth: Option<PathBuf>,
    pub output: PathBuf,
}

/// Keys in the order they are echoed.
pub const KEYS: &[&str] = &[
    "frames",
    "init_box",
    "truth",
    "output",
    "seed",
    "theta",
    "beta",
    "sigma_x",
    "sigma_y",
    "sigma_s",
    "iterations",
    "samples_per_iteration",
    "k0",
    "tau",
    "cutoff",
    "abrupt_threshold",
    "grid_rows",
    "grid_cols",
    "patch",
    "matcher_iterations",
    "edge_threshold",
    "gmm_components",
    "hellinger_samples",
    "lambda_floor",
    "dos_update",
    "lock_scale",
];

fn err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| err(key, format!("cannot parse {v:?}: {e}")))
}

fn parse_box(key: &str, v: &str) -> Result<PixelRect> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(err(key, "expected x,y,w,h"));
    }
    let n: Vec<usize> = parts
        .iter()
        .map(|p| parse_num::<usize>(key, p))
        .collect::<Result<_>>()?;
    if n[2] == 0 || n[3] == 0 {
        return Err(err(key, "box width and height must be positive"));
    }
    Ok(PixelRect {
        x0: n[0],
        y0: n[1],
        x1: n[0] + n[2],
        y1: n[1] + n[3],
    })
}

fn resolve(base: &Path, v: &str) -> Result<PathBuf> {
    let p = Path::new(v);
    let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    Ok(std::path::absolute(joined)?)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut t = TrackerConfig::default();
        let mut frames = None;
        let mut init_box = None;
        let mut truth = None;
        let mut output = None;
        let mut seen = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    what: "config",
                    line: i + 1,
                    message: format!("expected key = value, found {line:?}"),
                });
            };
            let (key, v) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(err(key, "unknown key"));
            }
            if seen.contains(&key) {
                return Err(err(key, "given twice"));
            }
            seen.push(key);
            let s = &mut t.sampler;
            match key {
                "frames" => frames = Some(resolve(base, v)?),
                "init_box" => init_box = Some(parse_box(key, v)?),
                "truth" => truth = Some(resolve(base, v)?),
                "output" => output = Some(resolve(base, v)?),
                "seed" => t.seed = parse_num(key, v)?,
                "theta" => s.theta = parse_num(key, v)?,
                "beta" => s.beta = parse_num(key, v)?,
                "sigma_x" => s.sigma[0] = parse_num(key, v)?,
                "sigma_y" => s.sigma[1] = parse_num(key, v)?,
                "sigma_s" => s.sigma[2] = parse_num(key, v)?,
                "iterations" => s.iterations = parse_num(key, v)?,
                "samples_per_iteration" => s.samples_per_iteration = parse_num(key, v)?,
                "k0" => s.k0 = if v == "auto" { None } else { Some(parse_num(key, v)?) },
                "tau" => s.tau = parse_num(key, v)?,
                "cutoff" => s.cutoff = parse_num(key, v)?,
                "abrupt_threshold" => t.abrupt_threshold = parse_num(key, v)?,
                "grid_rows" => t.grid_rows = parse_num(key, v)?,
                "grid_cols" => t.grid_cols = parse_num(key, v)?,
                "patch" => t.matcher.patch = parse_num(key, v)?,
                "matcher_iterations" => t.matcher.iterations = parse_num(key, v)?,
                "edge_threshold" => t.edge_threshold = parse_num(key, v)?,
                "gmm_components" => t.gmm_components = parse_num(key, v)?,
                "hellinger_samples" => t.hellinger_samples = parse_num(key, v)?,
                "lambda_floor" => s.lambda_floor = parse_num(key, v)?,
                "dos_update" => {
                    s.dos_update = DosUpdate::parse(v)
                        .ok_or_else(|| err(key, "expected standard, literal or frozen"))?
                }
                "lock_scale" => s.lock_scale = parse_num(key, v)?,
                _ => unreachable!("key list and match arms agree"),
            }
        }

        let cfg = RunConfig {
            tracker: t,
            frames: frames.ok_or_else(|| err("frames", "required"))?,
            init_box: init_box.ok_or_else(|| err("init_box", "required"))?,
            truth,
            output: output.ok_or_else(|| err("output", "required"))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tracker;
        let s = &t.sampler;
        let check = |ok: bool, key: &str, msg: &str| if ok { Ok(()) } else { Err(err(key, msg)) };
        check(s.theta > 0.0 && s.theta < 1.0, "theta", "must lie in (0, 1)")?;
        check((0.0..=1.0).contains(&s.beta), "beta", "must lie in [0, 1]")?;
        for (k, v) in ["sigma_x", "sigma_y", "sigma_s"].iter().zip(s.sigma) {
            check(v > 0.0 && v.is_finite(), k, "must be positive")?;
        }
        check(s.iterations > 0, "iterations", "must be positive")?;
        check(s.samples_per_iteration > 0, "samples_per_iteration", "must be positive")?;
        check(s.k0.is_none_or(|k| k > 0.0), "k0", "must be positive or auto")?;
        check(s.tau >= 0.0 && s.tau.is_finite(), "tau", "must be non-negative")?;
        check(s.cutoff > 0.0, "cutoff", "must be positive")?;
        check(t.abrupt_threshold.is_finite(), "abrupt_threshold", "must be finite")?;
        check(t.grid_rows > 0, "grid_rows", "must be positive")?;
        check(t.grid_cols > 0, "grid_cols", "must be positive")?;
        check(t.matcher.patch > 0, "patch", "must be positive")?;
        check(t.matcher.iterations > 0, "matcher_iterations", "must be positive")?;
        check(
            t.edge_threshold >= 0.0 && t.edge_threshold <= 1.0,
            "edge_threshold",
            "must lie in [0, 1]",
        )?;
        check(t.gmm_components > 0, "gmm_components", "must be positive")?;
        check(t.hellinger_samples > 0, "hellinger_samples", "must be positive")?;
        check(s.lambda_floor > 0.0, "lambda_floor", "must be positive")?;
        Ok(())
    }

    /// Every key with its effective value; parsing the text gives back `self`.
    pub fn to_text(&self) -> String {
        let t = &self.tracker;
        let s = &t.sampler;
        let b = self.init_box;
        let mut out = String::from("# effective configuration\n");
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        put("frames", self.frames.display().to_string());
        put(
            "init_box",
            format!("{},{},{},{}", b.x0, b.y0, b.width(), b.height()),
        );
        if let Some(truth) = &self.truth {
            put("truth", truth.display().to_string());
        }
        put("output", self.output.display().to_string());
        put("seed", t.seed.to_string());
        put("theta", s.theta.to_string());
        put("beta", s.beta.to_string());
        put("sigma_x", s.sigma[0].to_string());
        put("sigma_y", s.sigma[1].to_string());
        put("sigma_s", s.sigma[2].to_string());
        put("iterations", s.iterations.to_string());
        put("samples_per_iteration", s.samples_per_iteration.to_string());
        put("k0", s.k0.map_or("auto".into(), |k| k.to_string()));
        put("tau", s.tau.to_string());
        put("cutoff", s.cutoff.to_string());
        put("abrupt_threshold", t.abrupt_threshold.to_string());
        put("grid_rows", t.grid_rows.to_string());
        put("grid_cols", t.grid_cols.to_string());
        put("patch", t.matcher.patch.to_string());
        put("matcher_iterations", t.matcher.iterations.to_string());
        put("edge_threshold", t.edge_threshold.to_string());
        put("gmm_components", t.gmm_components.to_string());
        put("hellinger_samples", t.hellinger_samples.to_string());
        put("lambda_floor", s.lambda_floor.to_string());
        put("dos_update", s.dos_update.name().to_string());
        put("lock_scale", s.lock_scale.to_string());
        out
    }
}
