//! Row-major `f32` matrix that many workers may update concurrently.
//!
//! Cells are stored as relaxed atomics, so unsynchronized updates from
//! several threads race benignly (a lost update is possible, a torn value
//! is not). With one worker the arithmetic is identical to a plain slice.

use std::sync::atomic::{AtomicU32, Ordering};

pub(crate) struct SharedMatrix {
    data: Vec<AtomicU32>,
    cols: usize,
}

impl SharedMatrix {
    pub fn from_vec(values: Vec<f32>, cols: usize) -> Self {
        debug_assert_eq!(values.len() % cols.max(1), 0);
        SharedMatrix { data: values.into_iter().map(|v| AtomicU32::new(v.to_bits())).collect(), cols }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_vec(vec![0.0; rows * cols], cols)
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data.into_iter().map(|a| f32::from_bits(a.into_inner())).collect()
    }


    #[inline]
    fn row(&self, r: usize) -> &[AtomicU32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        f32::from_bits(self.data[r * self.cols + c].load(Ordering::Relaxed))
    }

    #[inline]
    pub fn set(&self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c].store(v.to_bits(), Ordering::Relaxed);
    }

    #[inline]
    pub fn read_row(&self, r: usize, out: &mut [f32]) {
        for (o, a) in out.iter_mut().zip(self.row(r)) {
            *o = f32::from_bits(a.load(Ordering::Relaxed));
        }
    }

    #[inline]
    pub fn write_row(&self, r: usize, src: &[f32]) {
        for (a, &v) in self.row(r).iter().zip(src) {
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    /// `row += delta`
    #[inline]
    pub fn add_row(&self, r: usize, delta: &[f32]) {
        for (a, &d) in self.row(r).iter().zip(delta) {
            let v = f32::from_bits(a.load(Ordering::Relaxed)) + d;
            a.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    /// `acc += row`
    #[inline]
    pub fn accumulate_row(&self, r: usize, acc: &mut [f32]) {
        for (o, a) in acc.iter_mut().zip(self.row(r)) {
            *o += f32::from_bits(a.load(Ordering::Relaxed));
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|a| f32::from_bits(a.load(Ordering::Relaxed)).is_finite())
    }
}
