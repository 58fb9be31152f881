use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use abtrack_core::eval::{evaluate, write_curve, EvalSummary, GroundTruth};
use abtrack_core::imaging::list_numbered_frames;
use abtrack_core::report::{read_results, write_abruptness, write_diagnostics, write_results};
use abtrack_core::{generate_synthetic, track_files, Error, Result, SyntheticSequence, SyntheticSpec, TrackerRun};

use crate::config::RunConfig;

pub const RESULTS_FILE: &str = "results.csv";
pub const ABRUPTNESS_FILE: &str = "abruptness.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const CONFIG_ECHO_FILE: &str = "config.txt";

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Frame files numbered consecutively from the first one found; a gap is
/// reported as the missing frame's index.
pub fn frame_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let numbered = list_numbered_frames(dir)?;
    let Some(&(first, _)) = numbered.first() else {
        return Err(Error::TooFewFrames(0));
    };
    for (i, (n, _)) in numbered.iter().enumerate() {
        let expected = first + i as u64;
        if *n != expected {
            return Err(Error::Frame {
                index: i + 1,
                source: Box::new(Error::InvalidFrame(format!(
                    "frame number {expected} missing from {}",
                    dir.display()
                ))),
            });
        }
    }
    Ok(numbered.into_iter().map(|(_, p)| p).collect())
}

/// Runs the tracker and writes results, abruptness, diagnostics and the
/// effective configuration into the output directory. With a truth file the
/// evaluation outputs are written too.
pub fn cmd_track(config_path: &Path) -> Result<(RunConfig, TrackerRun)> {
    let cfg = RunConfig::load(config_path)?;
    let paths = frame_paths(&cfg.frames)?;
    let run = track_files(&paths, cfg.init_box, &cfg.tracker)?;

    fs::create_dir_all(&cfg.output)?;
    fs::write(cfg.output.join(CONFIG_ECHO_FILE), cfg.to_text())?;
    write_with(&cfg.output.join(RESULTS_FILE), |b| write_results(&run, b))?;
    write_with(&cfg.output.join(ABRUPTNESS_FILE), |b| write_abruptness(&run, b))?;
    write_with(&cfg.output.join(DIAGNOSTICS_FILE), |b| write_diagnostics(&run, b))?;
    if let Some(truth) = &cfg.truth {
        cmd_eval(&cfg.output.join(RESULTS_FILE), truth, &cfg.output)?;
    }
    Ok((cfg, run))
}

/// Scores a results file against ground truth; writes `summary.txt`,
/// `precision.csv` and `success.csv`.
pub fn cmd_eval(results: &Path, truth: &Path, out: &Path) -> Result<EvalSummary> {
    let table = read_results(BufReader::new(fs::File::open(results)?))?;
    if table.rows.is_empty() {
        return Err(Error::EmptySamples);
    }
    let gt = GroundTruth::read_csv(fs::File::open(truth)?)?;
    let fallback = gt.boxes.values().next().map(|b| (b.w, b.h));
    let summary = evaluate(&table.boxes(fallback)?, &gt)?;

    fs::create_dir_all(out)?;
    let seed_line = table
        .seed
        .map_or_else(String::new, |s| format!("# seed={s}\n"));
    write_with(&out.join("summary.txt"), |b| {
        b.extend_from_slice(seed_line.as_bytes());
        summary.write_summary(b)
    })?;
    write_with(&out.join("precision.csv"), |b| {
        b.extend_from_slice(seed_line.as_bytes());
        write_curve(&summary.precision, b)
    })?;
    write_with(&out.join("success.csv"), |b| {
        b.extend_from_slice(seed_line.as_bytes());
        write_curve(&summary.success, b)
    })?;
    Ok(summary)
}

/// Writes a synthetic sequence, its truth, and a ready-to-run `track.cfg`.
pub fn cmd_generate(spec: &SyntheticSpec, out: &Path) -> Result<SyntheticSequence> {
    let seq = generate_synthetic(spec)?;
    seq.write_to(out)?;
    let b = seq.init_box();
    let cfg = format!(
        "# generated sequence, seed={}\nframes = frames\ninit_box = {},{},{},{}\ntruth = truth.csv\noutput = run\nseed = {}\n",
        spec.seed,
        b.x0,
        b.y0,
        b.width(),
        b.height(),
        spec.seed
    );
    fs::write(out.join("track.cfg"), cfg)?;
    Ok(seq)
}
