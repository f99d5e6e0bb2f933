use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::formats::{BinReader, BinWriter};

/// Features with a spread below this are left centered but unscaled.
const MIN_STD: f64 = 1e-8;

/// Per-feature affine standardization fitted on a training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(data: &Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::Empty("cannot standardize zero rows".into()));
        }
        let mean = data.mean_axis(Axis(0)).expect("non-empty");
        let std = data.std_axis(Axis(0), 0.0).mapv(|s| if s < MIN_STD { 1.0 } else { s });
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, data: &Array2<f64>) -> Array2<f64> {
        (data - &self.mean) / &self.std
    }

    pub fn inverse(&self, data: &Array2<f64>) -> Array2<f64> {
        data * &self.std + &self.mean
    }

    pub(crate) fn write_to(&self, w: &mut BinWriter) {
        w.u32(self.dim() as u32);
        for &v in self.mean.iter().chain(self.std.iter()) {
            w.f64(v);
        }
    }

    pub(crate) fn read_from(r: &mut BinReader<'_>) -> Result<Self> {
        let d = r.u32()? as usize;
        Ok(Self {
            mean: r.f64_vec(d)?.into(),
            std: r.f64_vec(d)?.into(),
        })
    }
}

/// Writes an optional standardizer as a presence byte plus payload.
pub(crate) fn write_optional(w: &mut BinWriter, s: Option<&Standardizer>) {
    match s {
        Some(s) => {
            w.u8(1);
            s.write_to(w);
        }
        None => {
            w.u8(0);
        }
    }
}

pub(crate) fn read_optional(r: &mut BinReader<'_>) -> Result<Option<Standardizer>> {
    match r.u8()? {
        0 => Ok(None),
        1 => Ok(Some(Standardizer::read_from(r)?)),
        t => Err(Error::parse(format!("bad standardizer flag {t}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn fit_transform_inverse() {
        let x = array![[1.0, 5.0, 3.0], [3.0, 5.0, -1.0]];
        let s = Standardizer::fit(&x).unwrap();
        let z = s.transform(&x);
        assert_eq!(z, array![[-1.0, 0.0, 1.0], [1.0, 0.0, -1.0]]);
        assert_eq!(s.inverse(&z), x);
        assert!(Standardizer::fit(&Array2::zeros((0, 3))).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let s = Standardizer::fit(&array![[1.0, 2.0], [4.0, 8.0]]).unwrap();
        let mut w = BinWriter::new();
        write_optional(&mut w, Some(&s));
        write_optional(&mut w, None);
        let bytes = w.finish();
        let mut r = BinReader::new(&bytes);
        assert_eq!(read_optional(&mut r).unwrap(), Some(s));
        assert_eq!(read_optional(&mut r).unwrap(), None);
        r.finish().unwrap();
    }
}
