//! Interchange formats: rays files, point CSVs and session CSV exports.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Ray, SystemMode, Vec3};
use crate::session::MeasurementSession;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column {0}")]
    MissingColumn(&'static str),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("a rays file needs at least 2 rays, got {0}")]
    TooFewRays(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `{"mode": "paper" | "projection", "rays": [{"origin": [..], "direction": [..]}]}`
///
/// Directions are normalized on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaysFile {
    #[serde(default)]
    pub mode: SystemMode,
    pub rays: Vec<Ray>,
}

impl RaysFile {
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let file: RaysFile = serde_json::from_str(text)?;
        if file.rays.len() < 2 {
            return Err(FormatError::TooFewRays(file.rays.len()));
        }
        Ok(file)
    }
}

/// Reads `id,x,y,z` rows. A `point_id` column is accepted in place of `id`
/// and extra columns are ignored, so session exports can be read back.
pub fn read_points_csv<R: Read>(reader: R) -> Result<Vec<(String, Vec3)>, FormatError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &'static str| headers.iter().position(|h| h == name);
    let id_col = col("id").or_else(|| col("point_id")).ok_or(FormatError::MissingColumn("id"))?;
    let x_col = col("x").ok_or(FormatError::MissingColumn("x"))?;
    let y_col = col("y").ok_or(FormatError::MissingColumn("y"))?;
    let z_col = col("z").ok_or(FormatError::MissingColumn("z"))?;

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64, FormatError> {
            let s = field(i);
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(FormatError::Row {
                    line,
                    message: format!("{s:?} is not a finite number"),
                }),
            }
        };
        let id = field(id_col).to_string();
        if id.is_empty() {
            return Err(FormatError::Row {
                line,
                message: "empty id".into(),
            });
        }
        out.push((id, Vec3::new(num(x_col)?, num(y_col)?, num(z_col)?)));
    }
    Ok(out)
}

pub fn write_points_csv<W: Write>(writer: W, points: &[(String, Vec3)]) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "x", "y", "z"])?;
    for (id, p) in points {
        w.write_record([id.clone(), p.x.to_string(), p.y.to_string(), p.z.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub const EXPORT_HEADER: [&str; 10] = ["point_id", "label", "x", "y", "z", "sigma0", "n_rays", "sxx", "syy", "szz"];

/// One row per point with a result; variances from the covariance diagonal.
pub fn write_session_csv<W: Write>(writer: W, session: &MeasurementSession) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EXPORT_HEADER)?;
    for p in &session.points {
        let Some(r) = &p.result else { continue };
        let var = r.variances();
        w.write_record([
            p.id.clone(),
            p.label.clone(),
            r.point.x.to_string(),
            r.point.y.to_string(),
            r.point.z.to_string(),
            r.sigma0.to_string(),
            p.rays.len().to_string(),
            var.x.to_string(),
            var.y.to_string(),
            var.z.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn session_csv_string(session: &MeasurementSession) -> String {
    let mut buf = Vec::new();
    write_session_csv(&mut buf, session).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rays_file_normalizes_and_defaults() {
        let f = RaysFile::from_json(r#"{"rays":[{"origin":[0,0,5],"direction":[0,0,-2]},{"origin":[5,0,5],"direction":[-1,0,-1]}]}"#)
            .unwrap();
        assert_eq!(f.mode, SystemMode::ProjectionThreeRow);
        assert_eq!(f.rays[0].direction(), Vec3::new(0.0, 0.0, -1.0));
        let f = RaysFile::from_json(r#"{"mode":"paper","rays":[{"origin":[0,0,5],"direction":[0,0,-2]}]}"#);
        assert!(matches!(f, Err(FormatError::TooFewRays(1))));
        let f = RaysFile::from_json(r#"{"mode":"paper","rays":[{"origin":[0,0,5],"direction":[0,0,0]},{"origin":[0,0,5],"direction":[0,0,1]}]}"#);
        assert!(matches!(f, Err(FormatError::Json(_))));
        assert!(RaysFile::from_json(r#"{"mode":"other","rays":[]}"#).is_err());
    }

    #[test]
    fn points_csv() {
        let pts = vec![("a".to_string(), Vec3::new(0.1, -2.5, 1e-7)), ("b,c".to_string(), Vec3::new(1.0 / 3.0, 0.0, 7.0))];
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &pts).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("id,x,y,z\n"));
        assert_eq!(read_points_csv(&buf[..]).unwrap(), pts);

        let alt = "point_id,label,x,y,z,sigma0\nq,lbl,1,2,3,0.5\n";
        assert_eq!(read_points_csv(alt.as_bytes()).unwrap(), vec![("q".to_string(), Vec3::new(1.0, 2.0, 3.0))]);
        assert!(matches!(read_points_csv("id,x,y\n".as_bytes()), Err(FormatError::MissingColumn("z"))));
        assert!(matches!(read_points_csv("id,x,y,z\na,1,nan,3\n".as_bytes()), Err(FormatError::Row { .. })));
    }

    #[test]
    fn empty_session_export_has_header_only() {
        let mut s = MeasurementSession::new("p", "s");
        s.add_point(None, "lonely", SystemMode::PaperTwoRow).unwrap();
        assert_eq!(session_csv_string(&s), "point_id,label,x,y,z,sigma0,n_rays,sxx,syy,szz\n");
    }
}
