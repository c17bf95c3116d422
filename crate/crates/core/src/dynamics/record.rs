//! Detection records and their storage formats.
//!
//! # Binary container
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! file   := magic "RABIREC\0" (8 bytes) | version u16 (= 1) | count u64 | record*count
//! record := scheme u8 (0 perfect, 1 ancilla, 2 noisy)
//!           flags u8 (bit 0: Rabi parameters present, bit 1: system qubit)
//!           fock_dim u32 | initial_fock u32 | dt f64 | n_steps u64
//!           master_seed u64 | stream u64
//!           omega f64 | omega_q f64 | lambda_c f64 | kappa f64     (zero when absent)
//!           ancilla: omega_s, omega_w, gamma_s, gamma_w, eta_ld2, epsilon (6 x f64)
//!           noisy:   gamma_dph, gamma_m, gamma_h, gamma_c             (4 x f64)
//!           perfect: nothing
//!           n_events u64 | (step u64, channel u32) * n_events
//! ```
//!
//! The text export carries the same fields as `# key = value` header lines
//! (floats in shortest round-trip form) followed by one `step_index channel_id`
//! line per event.

use std::io::{BufRead, Read, Write};

use super::model::{ModelSpec, SchemeConfig};
use crate::error::{Error, Result};
use crate::models::{AncillaParams, NoiseParams, RabiParams};

const MAGIC: &[u8; 8] = b"RABIREC\0";
const VERSION: u16 = 1;

/// A photon detection in step `step`, i.e. during `(step dt, (step + 1) dt]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub step: u64,
    pub channel: u32,
}

/// Detection signal `D(t, 0)` with everything needed to replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub spec: ModelSpec,
    pub dt: f64,
    pub n_steps: u64,
    pub initial_fock: u32,
    pub master_seed: u64,
    /// Per-trajectory stream of the master seed.
    pub stream: u64,
    pub events: Vec<Event>,
}

impl TrajectoryRecord {
    pub fn t_final(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn t_grid(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|s| s as f64 * self.dt).collect()
    }

    /// Time stamps of the events at the end of their step.
    pub fn event_times(&self) -> Vec<f64> {
        self.events.iter().map(|e| (e.step + 1) as f64 * self.dt).collect()
    }

    pub fn count(&self) -> usize {
        self.events.len()
    }

    /// Detections up to and including `step`.
    pub fn count_until(&self, step: u64) -> usize {
        self.events.partition_point(|e| e.step <= step)
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.events.windows(2) {
            if w[1].step <= w[0].step {
                return Err(Error::RecordMismatch("events must have strictly increasing steps".into()));
            }
        }
        if let Some(last) = self.events.last() {
            if last.step >= self.n_steps {
                return Err(Error::RecordMismatch(format!("event step {} beyond the grid", last.step)));
            }
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        let spec = &self.spec;
        w.write_all(&[spec.scheme.code()])?;
        let flags = u8::from(spec.rabi.is_some()) | (u8::from(spec.system_qubit) << 1);
        w.write_all(&[flags])?;
        w.write_all(&(spec.fock_dim as u32).to_le_bytes())?;
        w.write_all(&self.initial_fock.to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.n_steps.to_le_bytes())?;
        w.write_all(&self.master_seed.to_le_bytes())?;
        w.write_all(&self.stream.to_le_bytes())?;
        for v in rabi_fields(spec.rabi) {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in scheme_fields(&spec.scheme) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.events.len() as u64).to_le_bytes())?;
        for e in &self.events {
            w.write_all(&e.step.to_le_bytes())?;
            w.write_all(&e.channel.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let scheme_code = read_u8(r)?;
        let flags = read_u8(r)?;
        let fock_dim = read_u32(r)? as usize;
        let initial_fock = read_u32(r)?;
        let dt = read_f64(r)?;
        let n_steps = read_u64(r)?;
        let master_seed = read_u64(r)?;
        let stream = read_u64(r)?;
        let rf: Vec<f64> = (0..4).map(|_| read_f64(r)).collect::<Result<_>>()?;
        let rabi = (flags & 1 == 1).then_some(RabiParams { omega: rf[0], omega_q: rf[1], lambda_c: rf[2], kappa: rf[3] });
        let scheme = match scheme_code {
            0 => SchemeConfig::Perfect,
            1 => {
                let a: Vec<f64> = (0..6).map(|_| read_f64(r)).collect::<Result<_>>()?;
                SchemeConfig::Ancilla(AncillaParams {
                    omega_s: a[0],
                    omega_w: a[1],
                    gamma_s: a[2],
                    gamma_w: a[3],
                    eta_ld2: a[4],
                    epsilon: a[5],
                })
            }
            2 => {
                let a: Vec<f64> = (0..4).map(|_| read_f64(r)).collect::<Result<_>>()?;
                SchemeConfig::Noisy(NoiseParams { gamma_dph: a[0], gamma_m: a[1], gamma_h: a[2], gamma_c: a[3] })
            }
            other => return Err(Error::Format(format!("unknown scheme code {other}"))),
        };
        let n_events = read_u64(r)?;
        let mut events = Vec::with_capacity(n_events.min(1 << 20) as usize);
        for _ in 0..n_events {
            let step = read_u64(r)?;
            let channel = read_u32(r)?;
            events.push(Event { step, channel });
        }
        let spec = ModelSpec { rabi, scheme, fock_dim, system_qubit: flags & 2 == 2 };
        let rec = Self { spec, dt, n_steps, initial_fock, master_seed, stream, events };
        rec.validate()?;
        Ok(rec)
    }

    /// Lossless text form: `# key = value` header, then `step channel` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let spec = &self.spec;
        s.push_str(&format!("# scheme = {}\n", spec.scheme.name()));
        s.push_str(&format!("# system_qubit = {}\n", spec.system_qubit));
        s.push_str(&format!("# fock_dim = {}\n", spec.fock_dim));
        s.push_str(&format!("# initial_fock = {}\n", self.initial_fock));
        s.push_str(&format!("# dt = {:?}\n", self.dt));
        s.push_str(&format!("# n_steps = {}\n", self.n_steps));
        s.push_str(&format!("# master_seed = {}\n", self.master_seed));
        s.push_str(&format!("# stream = {}\n", self.stream));
        if let Some(p) = spec.rabi {
            s.push_str(&format!(
                "# rabi = {:?} {:?} {:?} {:?}\n",
                p.omega, p.omega_q, p.lambda_c, p.kappa
            ));
        }
        let fields = scheme_fields(&spec.scheme);
        if !fields.is_empty() {
            let joined: Vec<String> = fields.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&format!("# scheme_params = {}\n", joined.join(" ")));
        }
        for e in &self.events {
            s.push_str(&format!("{} {}\n", e.step, e.channel));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut header = std::collections::HashMap::new();
        let mut events = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::Format(format!("bad header line: {line}")))?;
                header.insert(k.trim().to_string(), v.trim().to_string());
                continue;
            }
            let mut it = line.split_whitespace();
            let step = parse(it.next(), line)?;
            let channel = parse(it.next(), line)?;
            events.push(Event { step, channel });
        }
        let get = |k: &str| header.get(k).ok_or_else(|| Error::Format(format!("missing header {k}")));
        let floats = |k: &str| -> Result<Vec<f64>> {
            get(k)?.split_whitespace().map(|v| parse(Some(v), k)).collect()
        };
        let rabi = match header.get("rabi") {
            Some(_) => {
                let f = floats("rabi")?;
                if f.len() != 4 {
                    return Err(Error::Format("rabi needs four values".into()));
                }
                Some(RabiParams { omega: f[0], omega_q: f[1], lambda_c: f[2], kappa: f[3] })
            }
            None => None,
        };
        let scheme = match get("scheme")?.as_str() {
            "perfect" => SchemeConfig::Perfect,
            "ancilla" => {
                let a = floats("scheme_params")?;
                if a.len() != 6 {
                    return Err(Error::Format("ancilla scheme needs six values".into()));
                }
                SchemeConfig::Ancilla(AncillaParams {
                    omega_s: a[0],
                    omega_w: a[1],
                    gamma_s: a[2],
                    gamma_w: a[3],
                    eta_ld2: a[4],
                    epsilon: a[5],
                })
            }
            "noisy" => {
                let a = floats("scheme_params")?;
                if a.len() != 4 {
                    return Err(Error::Format("noisy scheme needs four values".into()));
                }
                SchemeConfig::Noisy(NoiseParams { gamma_dph: a[0], gamma_m: a[1], gamma_h: a[2], gamma_c: a[3] })
            }
            other => return Err(Error::Format(format!("unknown scheme {other}"))),
        };
        let spec = ModelSpec {
            rabi,
            scheme,
            fock_dim: parse(Some(get("fock_dim")?), "fock_dim")?,
            system_qubit: parse(Some(get("system_qubit")?), "system_qubit")?,
        };
        let rec = Self {
            spec,
            dt: parse(Some(get("dt")?), "dt")?,
            n_steps: parse(Some(get("n_steps")?), "n_steps")?,
            initial_fock: parse(Some(get("initial_fock")?), "initial_fock")?,
            master_seed: parse(Some(get("master_seed")?), "master_seed")?,
            stream: parse(Some(get("stream")?), "stream")?,
            events,
        };
        rec.validate()?;
        Ok(rec)
    }
}

fn parse<T: std::str::FromStr>(s: Option<&str>, ctx: &str) -> Result<T> {
    s.and_then(|v| v.parse().ok()).ok_or_else(|| Error::Format(format!("cannot parse field in `{ctx}`")))
}

fn rabi_fields(p: Option<RabiParams>) -> [f64; 4] {
    p.map_or([0.0; 4], |p| [p.omega, p.omega_q, p.lambda_c, p.kappa])
}

fn scheme_fields(s: &SchemeConfig) -> Vec<f64> {
    match s {
        SchemeConfig::Perfect => vec![],
        SchemeConfig::Ancilla(a) => vec![a.omega_s, a.omega_w, a.gamma_s, a.gamma_w, a.eta_ld2, a.epsilon],
        SchemeConfig::Noisy(n) => vec![n.gamma_dph, n.gamma_m, n.gamma_h, n.gamma_c],
    }
}

fn read_exact<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated record: {e}")))?;
    Ok(b)
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    Ok(read_exact::<1, _>(r)?[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact(r)?))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_exact(r)?))
}

/// Writes a versioned container of records.
pub fn write_records<W: Write>(w: &mut W, records: &[TrajectoryRecord]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for r in records {
        r.write_binary(w)?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(r: &mut R) -> Result<Vec<TrajectoryRecord>> {
    let magic: [u8; 8] = read_exact(r)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a record container".into()));
    }
    let version = u16::from_le_bytes(read_exact(r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let count = read_u64(r)?;
    (0..count).map(|_| TrajectoryRecord::read_binary(r)).collect()
}
