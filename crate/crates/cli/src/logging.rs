//! Line-delimited JSON events on stderr.
//!
//! Pipeline stages call [`event`]; messages from the core library's `log`
//! calls arrive through [`JsonLogger`]. Both go through one locked writer so
//! lines never interleave. Nothing is written until [`init`] runs, which keeps
//! library users and tests quiet.

use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{Level, LevelFilter, Log, Metadata, Record};
use serde_json::{json, Map, Value};

static SINK: Mutex<()> = Mutex::new(());
static ENABLED: AtomicBool = AtomicBool::new(false);

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn write_line(mut obj: Map<String, Value>) {
    obj.insert("ts_ms".into(), json!(now_ms() as u64));
    let line = Value::Object(obj).to_string();
    let _guard = SINK.lock().unwrap_or_else(|p| p.into_inner());
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

/// Emits `{"level":"info","stage":..,"event":..,<fields>}`.
pub fn event(stage: &str, name: &str, fields: Value) {
    if !ENABLED.load(Ordering::Relaxed) {
        return;
    }
    let mut obj = Map::new();
    obj.insert("level".into(), json!("info"));
    obj.insert("stage".into(), json!(stage));
    obj.insert("event".into(), json!(name));
    if let Value::Object(extra) = fields {
        obj.extend(extra);
    }
    write_line(obj);
}

/// Times a stage and reports it as a `done` event with `elapsed_ms`.
pub struct StageTimer {
    stage: &'static str,
    start: Instant,
}

impl StageTimer {
    pub fn start(stage: &'static str) -> Self {
        event(stage, "start", json!({}));
        Self {
            stage,
            start: Instant::now(),
        }
    }

    pub fn done(self, mut fields: Value) {
        if let Value::Object(o) = &mut fields {
            o.insert(
                "elapsed_ms".into(),
                json!(self.start.elapsed().as_secs_f64() * 1e3),
            );
        }
        event(self.stage, "done", fields);
    }
}

pub struct JsonLogger {
    level: LevelFilter,
}

impl Log for JsonLogger {
    fn enabled(&self, metadata: &Metadata) -> bool {
        metadata.level() <= self.level
    }

    fn log(&self, record: &Record) {
        if !self.enabled(record.metadata()) {
            return;
        }
        let level = match record.level() {
            Level::Error => "error",
            Level::Warn => "warn",
            Level::Info => "info",
            Level::Debug => "debug",
            Level::Trace => "trace",
        };
        let mut obj = Map::new();
        obj.insert("level".into(), json!(level));
        obj.insert("target".into(), json!(record.target()));
        obj.insert("msg".into(), json!(record.args().to_string()));
        write_line(obj);
    }

    fn flush(&self) {}
}

/// Turns on stage events and installs the logger once; later calls only
/// re-enable events.
pub fn init(level: LevelFilter) {
    ENABLED.store(true, Ordering::Relaxed);
    let logger = Box::leak(Box::new(JsonLogger { level }));
    if log::set_logger(logger).is_ok() {
        log::set_max_level(level);
    }
}
