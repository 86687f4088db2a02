//! On-disk formats.
//!
//! * world: JSON `{config, user_vecs, item_vecs, prices, kappa_true}`
//! * event log: CSV `user,session,exposed,choice`, `exposed` is `;`-separated
//!   and `choice` is an item id or `NOBUY`
//! * checkpoint: JSON `{family, d, X, Y, rho}`
//! * loss trace: CSV `epoch,mean_nll,reg_term`
//! * slates: CSV `user,method,objective,k,rank,item,evps`
//! * metrics: CSV `method,objective,k,welfare,utility,revenue,sales,precision,std_*,n_runs,n_nobuy_users`
//!
//! Matrices are written as arrays of rows. Floats use the shortest
//! representation that parses back to the same value.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::MetricReport;
use crate::model::{Family, ModelParams};
use crate::sim::{Choice, LatentWorld, SessionEvent};
use crate::slate::SlateSpec;
use crate::train::EpochLoss;

pub const EVENTS_HEADER: [&str; 4] = ["user", "session", "exposed", "choice"];
pub const LOSS_HEADER: [&str; 3] = ["epoch", "mean_nll", "reg_term"];
pub const SLATES_HEADER: [&str; 7] = ["user", "method", "objective", "k", "rank", "item", "evps"];
pub const METRICS_HEADER: [&str; 15] = [
    "method",
    "objective",
    "k",
    "welfare",
    "utility",
    "revenue",
    "sales",
    "precision",
    "std_welfare",
    "std_utility",
    "std_revenue",
    "std_sales",
    "std_precision",
    "n_runs",
    "n_nobuy_users",
];

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

pub fn write_world(path: &Path, world: &LatentWorld) -> Result<()> {
    write_json(path, world)
}

pub fn read_world(path: &Path) -> Result<LatentWorld> {
    let world: LatentWorld = read_json(path)?;
    world.validate()?;
    Ok(world)
}

pub fn write_events_to<W: Write>(writer: W, events: &[SessionEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EVENTS_HEADER)?;
    for e in events {
        let exposed = e
            .exposed
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            e.user.to_string(),
            e.session.to_string(),
            exposed,
            e.choice.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Format {
        what: "event log",
        detail: e.to_string(),
    })
}

pub fn read_events_from<R: Read>(reader: R) -> Result<Vec<SessionEvent>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(EVENTS_HEADER) {
        return Err(Error::Format {
            what: "event log header",
            detail: format!("{:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let parse_id = |s: &str| {
        s.trim().parse::<usize>().map_err(|_| Error::Format {
            what: "event log",
            detail: format!("bad id {s:?}"),
        })
    };
    let mut events = Vec::new();
    for record in r.records() {
        let record = record?;
        let exposed = if record[2].trim().is_empty() {
            Vec::new()
        } else {
            record[2]
                .split(';')
                .map(parse_id)
                .collect::<Result<Vec<_>>>()?
        };
        let event = SessionEvent {
            user: parse_id(&record[0])?,
            session: parse_id(&record[1])?,
            exposed,
            choice: record[3].parse::<Choice>()?,
        };
        event.validate()?;
        events.push(event);
    }
    Ok(events)
}

pub fn write_events(path: &Path, events: &[SessionEvent]) -> Result<()> {
    let w = create(path)?;
    write_events_to(w, events)
}

pub fn read_events(path: &Path) -> Result<Vec<SessionEvent>> {
    read_events_from(open(path)?)
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    family: Family,
    d: usize,
    #[serde(rename = "X")]
    x: Matrix,
    #[serde(rename = "Y")]
    y: Matrix,
    rho: Vec<f64>,
}

pub fn checkpoint_json(params: &ModelParams) -> Result<String> {
    let ckpt = Checkpoint {
        family: params.family,
        d: params.dimension(),
        x: params.x.clone(),
        y: params.y.clone(),
        rho: params.rho.clone(),
    };
    Ok(serde_json::to_string(&ckpt)?)
}

pub fn params_from_checkpoint_json(json: &str) -> Result<ModelParams> {
    let ckpt: Checkpoint = serde_json::from_str(json)?;
    let bad = |detail: String| Error::Format {
        what: "checkpoint",
        detail,
    };
    if ckpt.x.cols() != ckpt.d || ckpt.y.cols() != ckpt.d {
        return Err(bad(format!("embedding width differs from d = {}", ckpt.d)));
    }
    if ckpt.rho.len() != ckpt.x.rows() {
        return Err(bad(format!(
            "{} rho values for {} users",
            ckpt.rho.len(),
            ckpt.x.rows()
        )));
    }
    Ok(ModelParams {
        family: ckpt.family,
        x: ckpt.x,
        y: ckpt.y,
        rho: ckpt.rho,
    })
}

pub fn write_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(checkpoint_json(params)?.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn read_checkpoint(path: &Path) -> Result<ModelParams> {
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    params_from_checkpoint_json(&json)
}

pub fn write_loss_trace(path: &Path, trace: &[EpochLoss]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(LOSS_HEADER)?;
    for e in trace {
        w.write_record([
            e.epoch.to_string(),
            e.mean_nll.to_string(),
            e.reg_term.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_slates_to<W: Write>(writer: W, slates: &[SlateSpec]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SLATES_HEADER)?;
    for s in slates {
        for (rank, (item, score)) in s.items.iter().zip(&s.scores).enumerate() {
            w.write_record([
                s.user.to_string(),
                s.method.to_string(),
                s.objective.to_string(),
                s.k.to_string(),
                (rank + 1).to_string(),
                item.to_string(),
                score.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::Format {
        what: "slates",
        detail: e.to_string(),
    })
}

pub fn write_slates(path: &Path, slates: &[SlateSpec]) -> Result<()> {
    write_slates_to(create(path)?, slates)
}

fn metrics_record(r: &MetricReport) -> Vec<String> {
    vec![
        r.method.to_string(),
        r.objective.to_string(),
        r.k.to_string(),
        r.welfare.to_string(),
        r.utility.to_string(),
        r.revenue.to_string(),
        r.sales.to_string(),
        r.precision.to_string(),
        r.std_welfare.to_string(),
        r.std_utility.to_string(),
        r.std_revenue.to_string(),
        r.std_sales.to_string(),
        r.std_precision.to_string(),
        r.n_runs.to_string(),
        r.n_nobuy_users.to_string(),
    ]
}

pub fn write_metrics_to<W: Write>(writer: W, reports: &[MetricReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRICS_HEADER)?;
    for r in reports {
        w.write_record(metrics_record(r))?;
    }
    w.flush().map_err(|e| Error::Format {
        what: "metrics",
        detail: e.to_string(),
    })
}

pub fn write_metrics(path: &Path, reports: &[MetricReport]) -> Result<()> {
    write_metrics_to(create(path)?, reports)
}

/// Per-run rows: a leading `seed` column followed by the metrics columns.
pub fn write_runs(path: &Path, rows: &[(u64, MetricReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(std::iter::once("seed").chain(METRICS_HEADER))?;
    for (seed, r) in rows {
        w.write_record(std::iter::once(seed.to_string()).chain(metrics_record(r)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    finish(w, path)
}
