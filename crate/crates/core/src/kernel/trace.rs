use std::io;
use std::sync::Arc;

use crate::expr::Value;

/// One row of a trace: the full variable snapshot after the events recorded
/// at `time`. Simultaneous events are merged into a single point whose
/// `fired` label joins the individual labels with `;`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPoint {
    pub time: f64,
    pub fired: String,
    /// Indexed like [`Trace::variables`].
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    variables: Arc<[String]>,
    points: Vec<ObservationPoint>,
    horizon: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceCsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed trace CSV: {0}")]
    Format(String),
}

impl Trace {
    pub(crate) fn new(variables: Arc<[String]>, points: Vec<ObservationPoint>, horizon: f64) -> Self {
        Self {
            variables,
            points,
            horizon,
        }
    }

    /// Builds a trace from raw parts, checking its invariants.
    pub fn from_parts(
        variables: Vec<String>,
        points: Vec<ObservationPoint>,
        horizon: f64,
    ) -> Result<Self, String> {
        if points.first().map(|p| p.time) != Some(0.0) {
            return Err("first point must be at time 0".into());
        }
        for w in points.windows(2) {
            if w[1].time <= w[0].time {
                return Err(format!("times not strictly increasing at {}", w[1].time));
            }
        }
        if points.last().is_some_and(|p| p.time > horizon) {
            return Err("point after horizon".into());
        }
        if points.iter().any(|p| p.values.len() != variables.len()) {
            return Err("snapshot does not cover every variable".into());
        }
        Ok(Self::new(variables.into(), points, horizon))
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn points(&self) -> &[ObservationPoint] {
        &self.points
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn last(&self) -> &ObservationPoint {
        self.points.last().expect("trace always has the time-0 point")
    }

    /// Value of `name` in the final snapshot.
    pub fn final_value(&self, name: &str) -> Option<Value> {
        self.column(name).map(|c| self.last().values[c])
    }

    /// Writes `time,fired,<dotted vars...>`, one row per point. Reals keep a
    /// decimal point so the column kinds survive a round trip.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), TraceCsvError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time".to_string(), "fired".to_string()];
        header.extend(self.variables.iter().cloned());
        w.write_record(&header)?;
        for p in &self.points {
            let mut row = vec![format!("{:?}", p.time), p.fired.clone()];
            row.extend(p.values.iter().map(format_value));
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Parses a trace written by [`Trace::write_csv`]. The horizon is not
    /// stored in the file; the caller supplies it.
    pub fn read_csv<R: io::Read>(input: R, horizon: f64) -> Result<Trace, TraceCsvError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.len() < 2 || &header[0] != "time" || &header[1] != "fired" {
            return Err(TraceCsvError::Format("header must start with time,fired".into()));
        }
        let variables: Vec<String> = header.iter().skip(2).map(String::from).collect();
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let time: f64 = rec[0]
                .parse()
                .map_err(|_| TraceCsvError::Format(format!("bad time `{}`", &rec[0])))?;
            let values = rec
                .iter()
                .skip(2)
                .map(parse_value)
                .collect::<Result<Vec<_>, _>>()?;
            points.push(ObservationPoint {
                time,
                fired: rec[1].to_string(),
                values,
            });
        }
        Trace::from_parts(variables, points, horizon).map_err(TraceCsvError::Format)
    }
}

fn format_value(v: &Value) -> String {
    match v {
        Value::Real(r) => format!("{r:?}"),
        other => other.to_string(),
    }
}

fn parse_value(s: &str) -> Result<Value, TraceCsvError> {
    match s {
        "true" => return Ok(Value::Bool(true)),
        "false" => return Ok(Value::Bool(false)),
        _ => {}
    }
    if let Ok(i) = s.parse::<i64>() {
        return Ok(Value::Int(i));
    }
    s.parse::<f64>()
        .map(Value::Real)
        .map_err(|_| TraceCsvError::Format(format!("bad value `{s}`")))
}
