//! File formats.
//!
//! | artifact    | layout                                                                  |
//! |-------------|-------------------------------------------------------------------------|
//! | signal      | `semg,v1,channels=<C>,rate=<hz>` then one CSV row of C values per sample |
//! | spikes      | `spikes,v1,channels=<C>,trains=<N>,steps=<T>` then one row of C*N '0'/'1' per step, channel-major |
//! | labels      | CSV `onset_sample,offset_sample,class_id` (header optional on read)     |
//! | profile     | JSON `{version, alpha, median_per_channel, theta_min}`                  |
//! | model       | JSON `{version, dims{H,hidden,classes,p}, lif{beta,u_th,t_sim}, solver{L,t_fix,mode}, weights_in, weights_out}` |
//! | train log   | CSV `epoch,mean_loss,train_acc,test_acc,seed`                           |
//!
//! Numbers are written in shortest round-trip decimal form, so reading a
//! file back reproduces the values exactly.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::detect::LabeledInterval;
use crate::encode::SpikeTensor;
use crate::error::{Error, Result};
use crate::pipeline::EpochLog;
use crate::scalar::Real;
use crate::signal::{CalibrationProfile, SignalBuffer};
use crate::snn::{SnnConfig, SnnModel, SolverConfig, SolverMode};

pub const PROFILE_VERSION: u32 = 1;
pub const MODEL_VERSION: u32 = 1;

fn header_fields<'a>(line: &'a str, what: &'static str, magic: &str) -> Result<Vec<(&'a str, &'a str)>> {
    let mut parts = line.trim_end().split(',');
    if parts.next() != Some(magic) {
        return Err(Error::Format { what, msg: format!("expected `{magic}` header, found `{line}`") });
    }
    let version = parts.next().unwrap_or("");
    if version != "v1" {
        return Err(Error::Version { what, found: version.to_string(), expected: "v1".into() });
    }
    parts
        .map(|p| {
            p.split_once('=')
                .ok_or_else(|| Error::Format { what, msg: format!("bad header field `{p}`") })
        })
        .collect()
}

fn field<T: std::str::FromStr>(fields: &[(&str, &str)], key: &str, what: &'static str) -> Result<T> {
    let raw = fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::Format { what, msg: format!("header lacks `{key}`") })?;
    raw.parse()
        .map_err(|_| Error::Format { what, msg: format!("bad `{key}` value `{raw}`") })
}

fn first_line(reader: &mut impl BufRead, what: &'static str) -> Result<String> {
    let mut line = String::new();
    reader
        .read_line(&mut line)
        .map_err(|e| Error::Format { what, msg: e.to_string() })?;
    if line.is_empty() {
        return Err(Error::Format { what, msg: "empty file".into() });
    }
    Ok(line)
}

fn body_lines(reader: impl BufRead, what: &'static str) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(move |(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 2, l))),
        Err(e) => Some(Err(Error::Format { what, msg: e.to_string() })),
    })
}

pub fn write_signal<T: Real>(w: &mut impl Write, sig: &SignalBuffer<T>) -> std::io::Result<()> {
    writeln!(w, "semg,v1,channels={},rate={}", sig.num_channels(), sig.rate_hz())?;
    let mut line = String::new();
    for t in 0..sig.len() {
        line.clear();
        for c in 0..sig.num_channels() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&sig.channel(c)[t].as_f64().to_string());
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_signal<T: Real>(mut r: impl BufRead) -> Result<SignalBuffer<T>> {
    const WHAT: &str = "signal file";
    let header = first_line(&mut r, WHAT)?;
    let fields = header_fields(&header, WHAT, "semg")?;
    let channels: usize = field(&fields, "channels", WHAT)?;
    let rate: f64 = field(&fields, "rate", WHAT)?;
    let mut data = vec![Vec::new(); channels];
    for line in body_lines(r, WHAT) {
        let (n, line) = line?;
        let mut count = 0;
        for (c, v) in line.split(',').enumerate() {
            if c >= channels {
                return Err(Error::Format { what: WHAT, msg: format!("line {n}: more than {channels} values") });
            }
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Format { what: WHAT, msg: format!("line {n}: bad number `{v}`") })?;
            data[c].push(T::of(v));
            count += 1;
        }
        if count != channels {
            return Err(Error::Format { what: WHAT, msg: format!("line {n}: {count} values, expected {channels}") });
        }
    }
    SignalBuffer::new(rate, data)
}

pub fn write_spikes(w: &mut impl Write, x: &SpikeTensor) -> std::io::Result<()> {
    writeln!(w, "spikes,v1,channels={},trains={},steps={}", x.channels(), x.trains(), x.steps())?;
    let mut line = Vec::with_capacity(x.column_len() + 1);
    for col in x.columns() {
        line.clear();
        line.extend(col.iter().map(|&b| b'0' + b));
        line.push(b'\n');
        w.write_all(&line)?;
    }
    Ok(())
}

pub fn read_spikes(mut r: impl BufRead) -> Result<SpikeTensor> {
    const WHAT: &str = "spike file";
    let header = first_line(&mut r, WHAT)?;
    let fields = header_fields(&header, WHAT, "spikes")?;
    let channels: usize = field(&fields, "channels", WHAT)?;
    let trains: usize = field(&fields, "trains", WHAT)?;
    let steps: usize = field(&fields, "steps", WHAT)?;
    let width = channels * trains;
    let mut bits = Vec::with_capacity(width * steps);
    for line in body_lines(r, WHAT) {
        let (n, line) = line?;
        let line = line.trim_end();
        if line.len() != width {
            return Err(Error::Format { what: WHAT, msg: format!("line {n}: {} columns, expected {width}", line.len()) });
        }
        for ch in line.bytes() {
            match ch {
                b'0' | b'1' => bits.push(ch - b'0'),
                _ => return Err(Error::Format { what: WHAT, msg: format!("line {n}: non-binary character") }),
            }
        }
    }
    if bits.len() != width * steps {
        return Err(Error::Format {
            what: WHAT,
            msg: format!("{} rows, header says {steps}", bits.len() / width.max(1)),
        });
    }
    SpikeTensor::from_bits(channels, trains, steps, bits)
}

pub fn write_labels(w: &mut impl Write, labels: &[LabeledInterval]) -> std::io::Result<()> {
    writeln!(w, "onset_sample,offset_sample,class_id")?;
    for l in labels {
        writeln!(w, "{},{},{}", l.onset, l.offset, l.class_id)?;
    }
    Ok(())
}

pub fn read_labels(r: impl BufRead) -> Result<Vec<LabeledInterval>> {
    const WHAT: &str = "label file";
    let mut out = Vec::new();
    for line in body_lines(r, WHAT) {
        let (n, line) = line?;
        let n = n - 1;
        if line.trim() == "onset_sample,offset_sample,class_id" {
            continue;
        }
        let v: Vec<usize> = line
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format { what: WHAT, msg: format!("line {n}: expected three integers") })?;
        let [onset, offset, class_id] = v[..] else {
            return Err(Error::Format { what: WHAT, msg: format!("line {n}: expected three fields") });
        };
        if offset <= onset {
            return Err(Error::Format { what: WHAT, msg: format!("line {n}: offset must exceed onset") });
        }
        if out.last().is_some_and(|p: &LabeledInterval| p.offset > onset) {
            return Err(Error::Format { what: WHAT, msg: format!("line {n}: labels overlap or are unsorted") });
        }
        out.push(LabeledInterval { onset, offset, class_id });
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    version: u32,
    alpha: f64,
    median_per_channel: Vec<f64>,
    theta_min: Option<f64>,
}

pub fn profile_to_json<T: Real>(p: &CalibrationProfile<T>) -> String {
    let f = ProfileFile {
        version: PROFILE_VERSION,
        alpha: p.alpha.as_f64(),
        median_per_channel: p.median_per_channel.iter().map(|v| v.as_f64()).collect(),
        theta_min: p.theta_min.map(|v| v.as_f64()),
    };
    serde_json::to_string_pretty(&f).expect("profile serializes")
}

fn check_version(what: &'static str, text: &str, expected: u32) -> Result<()> {
    #[derive(Deserialize)]
    struct Probe {
        version: Option<serde_json::Value>,
    }
    let probe: Probe = serde_json::from_str(text).map_err(|e| Error::Format { what, msg: e.to_string() })?;
    match probe.version {
        Some(serde_json::Value::Number(n)) if n.as_u64() == Some(expected as u64) => Ok(()),
        Some(v) => Err(Error::Version { what, found: v.to_string(), expected: expected.to_string() }),
        None => Err(Error::Format { what, msg: "missing `version`".into() }),
    }
}

pub fn profile_from_json<T: Real>(text: &str) -> Result<CalibrationProfile<T>> {
    const WHAT: &str = "calibration profile";
    check_version(WHAT, text, PROFILE_VERSION)?;
    let f: ProfileFile = serde_json::from_str(text).map_err(|e| Error::Format { what: WHAT, msg: e.to_string() })?;
    Ok(CalibrationProfile {
        alpha: T::of(f.alpha),
        median_per_channel: f.median_per_channel.into_iter().map(T::of).collect(),
        theta_min: f.theta_min.map(T::of),
    })
}

#[derive(Serialize, Deserialize)]
struct Dims {
    #[serde(rename = "H")]
    h: usize,
    hidden: usize,
    classes: usize,
    p: usize,
}

#[derive(Serialize, Deserialize)]
struct Lif {
    beta: f64,
    u_th: f64,
    t_sim: usize,
}

#[derive(Serialize, Deserialize)]
struct Solver {
    #[serde(rename = "L")]
    bin: usize,
    t_fix: usize,
    mode: SolverMode,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    dims: Dims,
    lif: Lif,
    solver: Solver,
    weights_in: Vec<f64>,
    weights_out: Vec<f64>,
}

pub fn model_to_json<T: Real>(m: &SnnModel<T>) -> String {
    let f = ModelFile {
        version: MODEL_VERSION,
        dims: Dims { h: m.input_dim, hidden: m.hidden, classes: m.classes, p: m.population },
        lif: Lif { beta: m.beta.as_f64(), u_th: m.u_th.as_f64(), t_sim: m.t_sim },
        solver: Solver { bin: m.solver.bin, t_fix: m.solver.t_fix, mode: m.solver.mode },
        weights_in: m.weights_in.iter().map(|v| v.as_f64()).collect(),
        weights_out: m.weights_out.iter().map(|v| v.as_f64()).collect(),
    };
    serde_json::to_string(&f).expect("model serializes")
}

pub fn model_from_json<T: Real>(text: &str) -> Result<SnnModel<T>> {
    const WHAT: &str = "model file";
    check_version(WHAT, text, MODEL_VERSION)?;
    let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::Format { what: WHAT, msg: e.to_string() })?;
    let cfg = SnnConfig {
        hidden: f.dims.hidden,
        population: f.dims.p,
        beta: T::of(f.lif.beta),
        u_th: T::of(f.lif.u_th),
        t_sim: f.lif.t_sim,
        solver: SolverConfig { bin: f.solver.bin, t_fix: f.solver.t_fix, mode: f.solver.mode },
    };
    SnnModel::from_weights(
        f.dims.h,
        f.dims.classes,
        &cfg,
        f.weights_in.into_iter().map(T::of).collect(),
        f.weights_out.into_iter().map(T::of).collect(),
    )
}

pub fn write_train_log(w: &mut impl Write, log: &[EpochLog], seed: u64) -> std::io::Result<()> {
    writeln!(w, "epoch,mean_loss,train_acc,test_acc,seed")?;
    for l in log {
        writeln!(w, "{},{},{},{},{}", l.epoch, l.mean_loss, l.train_acc, l.test_acc, seed)?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    Ok(BufReader::new(fs::File::open(path).map_err(|e| Error::io(path, e))?))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn save_signal<T: Real>(path: &Path, sig: &SignalBuffer<T>) -> Result<()> {
    write_with(path, |w| write_signal(w, sig))
}

pub fn load_signal<T: Real>(path: &Path) -> Result<SignalBuffer<T>> {
    read_signal(open(path)?)
}

pub fn save_spikes(path: &Path, x: &SpikeTensor) -> Result<()> {
    write_with(path, |w| write_spikes(w, x))
}

pub fn load_spikes(path: &Path) -> Result<SpikeTensor> {
    read_spikes(open(path)?)
}

pub fn save_labels(path: &Path, labels: &[LabeledInterval]) -> Result<()> {
    write_with(path, |w| write_labels(w, labels))
}

pub fn load_labels(path: &Path) -> Result<Vec<LabeledInterval>> {
    read_labels(open(path)?)
}

pub fn save_profile<T: Real>(path: &Path, p: &CalibrationProfile<T>) -> Result<()> {
    write_with(path, |w| writeln!(w, "{}", profile_to_json(p)))
}

pub fn load_profile<T: Real>(path: &Path) -> Result<CalibrationProfile<T>> {
    profile_from_json(&read_text(path)?)
}

pub fn save_model<T: Real>(path: &Path, m: &SnnModel<T>) -> Result<()> {
    write_with(path, |w| writeln!(w, "{}", model_to_json(m)))
}

pub fn load_model<T: Real>(path: &Path) -> Result<SnnModel<T>> {
    model_from_json(&read_text(path)?)
}

pub fn save_train_log(path: &Path, log: &[EpochLog], seed: u64) -> Result<()> {
    write_with(path, |w| write_train_log(w, log, seed))
}

/// Pretty JSON with a trailing newline.
pub fn save_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format { what: "json", msg: e.to_string() })?;
    write_with(path, |w| writeln!(w, "{text}"))
}

pub fn load_json<V: DeserializeOwned>(path: &Path) -> Result<V> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Format { what: "json", msg: e.to_string() })
}
