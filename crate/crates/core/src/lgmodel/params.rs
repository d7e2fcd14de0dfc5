use ndarray::{ArrayBase, DataMut, Dimension, RawData};

/// Flat access to every trainable tensor, in a fixed order.
///
/// Optimisers and finite-difference checks work on this view; gradients are stored in a
/// value of the same type so the orders always agree.
pub trait ParamTensors {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    fn set_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for t in self.tensors_mut() {
            let len = t.len();
            t.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        assert_eq!(offset, flat.len(), "flat parameter length");
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    /// `self += scale * other`
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        let src = other.tensors();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }
}

pub(crate) fn slice<S, D>(a: &ArrayBase<S, D>) -> &[f64]
where
    S: ndarray::Data<Elem = f64>,
    D: Dimension,
{
    a.as_slice().expect("parameter tensors are contiguous")
}

pub(crate) fn slice_mut<S, D>(a: &mut ArrayBase<S, D>) -> &mut [f64]
where
    S: DataMut + RawData<Elem = f64>,
    D: Dimension,
{
    a.as_slice_mut().expect("parameter tensors are contiguous")
}
