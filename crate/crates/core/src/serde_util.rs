//! Row-major JSON encodings for `nalgebra` vectors and matrices.

use crate::{Matrix, Vector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix, String> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err("matrix must have at least one row".into());
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return Err("matrix must have at least one column".into());
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(format!("row {bad} has {} entries, expected {ncols}", rows[bad].len()));
    }
    let m = Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err("matrix entries must be finite".into());
    }
    Ok(m)
}

pub mod vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        Ok(Vector::from_vec(raw))
    }
}

pub mod vectors {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vector], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vector>, D::Error> {
        let raw = Vec::<Vec<f64>>::deserialize(d)?;
        Ok(raw.into_iter().map(Vector::from_vec).collect())
    }
}

pub mod opt_vector {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Vector>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|x| x.as_slice()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vector>, D::Error> {
        let raw = Option::<Vec<f64>>::deserialize(d)?;
        Ok(raw.map(Vector::from_vec))
    }
}

pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        matrix_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub mod matrices {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[Matrix], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Vec<f64>>> = ms.iter().map(matrix_to_rows).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Matrix>, D::Error> {
        let raw = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        raw.iter()
            .map(|rows| matrix_from_rows(rows).map_err(serde::de::Error::custom))
            .collect()
    }
}
