//! CSV wire formats: point clouds (header `x1..xd`, one point per row) and
//! diagrams (`degree,birth,death,censored` with optional pairing columns).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::filtration::FilteredComplex;
use crate::persistence::{DiagramPoint, PersistenceDiagram};
use crate::pointcloud::PointCloud;

pub fn write_cloud_csv(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = (1..=cloud.dim()).map(|i| format!("x{i}")).collect();
    w.write_record(&header)?;
    for p in cloud.points() {
        w.write_record(p.iter().map(|c| format!("{c}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cloud_csv(path: &Path) -> Result<PointCloud> {
    let mut r = csv::Reader::from_path(path)?;
    let dim = r.headers()?.len();
    if dim == 0 {
        return Err(Error::InvalidParameter("cloud csv has no columns".into()));
    }
    let mut points = Vec::new();
    for record in r.records() {
        let record = record?;
        let p: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let p = p.map_err(|e| Error::InvalidParameter(format!("bad coordinate: {e}")))?;
        points.push(p);
    }
    PointCloud::new(points, dim)
}

fn vertex_list(complex: &FilteredComplex, idx: u32) -> String {
    complex
        .vertices(idx as usize)
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Write diagrams as `degree,birth,death,censored`; with a complex, the
/// pairing columns `pos_simplex,neg_simplex` carry semicolon-joined vertex
/// lists.
pub fn write_diagrams_csv(
    path: &Path,
    diagrams: &[PersistenceDiagram],
    complex: Option<&FilteredComplex>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if complex.is_some() {
        w.write_record(["degree", "birth", "death", "censored", "pos_simplex", "neg_simplex"])?;
    } else {
        w.write_record(["degree", "birth", "death", "censored"])?;
    }
    for d in diagrams {
        for p in d.points() {
            let base = [
                d.degree.to_string(),
                format!("{}", p.birth),
                format!("{}", p.death),
                p.censored.to_string(),
            ];
            match complex {
                None => w.write_record(&base)?,
                Some(c) => {
                    let pos = vertex_list(c, p.positive);
                    let neg = p.negative.map(|n| vertex_list(c, n)).unwrap_or_default();
                    w.write_record(base.iter().map(|s| s.as_str()).chain([pos.as_str(), neg.as_str()]))?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read diagrams back, one per degree `0..=max_degree`. Pairing columns are
/// ignored; loaded points carry synthetic simplex indices.
pub fn read_diagrams_csv(path: &Path) -> Result<Vec<PersistenceDiagram>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut per_degree: Vec<Vec<DiagramPoint>> = Vec::new();
    let mut r_max = 0.0f64;
    for record in r.records() {
        let record = record?;
        if record.len() < 4 {
            return Err(Error::InvalidParameter("diagram csv needs 4 columns".into()));
        }
        let parse_f = |i: usize| -> Result<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("bad diagram field: {e}")))
        };
        let degree: usize = record[0]
            .parse()
            .map_err(|e| Error::InvalidParameter(format!("bad degree: {e}")))?;
        let (birth, death) = (parse_f(1)?, parse_f(2)?);
        let censored = matches!(&record[3], "true" | "1");
        r_max = r_max.max(death);
        if per_degree.len() <= degree {
            per_degree.resize_with(degree + 1, Vec::new);
        }
        let positive = per_degree[degree].len() as u32;
        per_degree[degree].push(DiagramPoint {
            birth,
            death,
            censored,
            positive,
            negative: if censored { None } else { Some(positive) },
        });
    }
    Ok(per_degree
        .into_iter()
        .enumerate()
        .map(|(q, points)| PersistenceDiagram::new(q, r_max, points))
        .collect())
}

/// Serialize any value as pretty JSON to a file.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let s = serde_json::to_string_pretty(value)?;
    f.write_all(s.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    std::fs::File::open(path)?.read_to_string(&mut s)?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::build_rips;
    use crate::persistence::compute_persistence;
    use crate::pointcloud::{sample_binomial, DensitySpec};

    #[test]
    fn cloud_roundtrip() {
        let dir = std::env::temp_dir().join("tda_io_test_cloud");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cloud.csv");
        let cloud = sample_binomial(17, &DensitySpec::uniform(3), 3, 5).unwrap();
        write_cloud_csv(&path, &cloud).unwrap();
        let back = read_cloud_csv(&path).unwrap();
        assert_eq!(back.dim(), 3);
        assert_eq!(back.len(), 17);
        for (p, q) in cloud.points().iter().zip(back.points()) {
            for (a, b) in p.iter().zip(q) {
                assert_eq!(a, b, "shortest round-trip float representation");
            }
        }
    }

    #[test]
    fn diagram_roundtrip_with_pairing() {
        let dir = std::env::temp_dir().join("tda_io_test_dgm");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("diagram.csv");
        let cloud = sample_binomial(15, &DensitySpec::uniform(2), 2, 9).unwrap();
        let complex = build_rips(&cloud, 1.2, 1).unwrap();
        let dgms = compute_persistence(&complex, 1).unwrap();
        write_diagrams_csv(&path, &dgms, Some(&complex)).unwrap();
        let back = read_diagrams_csv(&path).unwrap();
        for (a, b) in dgms.iter().zip(&back) {
            assert_eq!(a.degree, b.degree);
            assert_eq!(a.len(), b.len());
            for (x, y) in a.points().iter().zip(b.points()) {
                assert_eq!(x.birth, y.birth);
                assert_eq!(x.death, y.death);
                assert_eq!(x.censored, y.censored);
            }
        }
    }
}
