//! Unsynchronized shared access to the parameter matrices.
//!
//! Training workers update the same matrices concurrently without locks,
//! in the manner of asynchronous ("Hogwild") SGD: concurrent updates to the
//! same row may be lost or interleaved. With a single worker every access is
//! exclusive and training is deterministic.

use std::marker::PhantomData;

use crate::model::EmbeddingModel;

#[derive(Clone, Copy)]
pub(crate) struct RawParams<'a> {
    input: *mut f32,
    output: *mut f32,
    indicator: *mut f32,
    rows: usize,
    dim: usize,
    _model: PhantomData<&'a mut EmbeddingModel>,
}

unsafe impl Send for RawParams<'_> {}
unsafe impl Sync for RawParams<'_> {}

impl<'a> RawParams<'a> {
    pub fn new(model: &'a mut EmbeddingModel) -> Self {
        let rows = model.input.rows();
        let dim = model.input.cols();
        RawParams {
            input: model.input.as_mut_slice().as_mut_ptr(),
            output: model.output.as_mut_slice().as_mut_ptr(),
            indicator: model
                .indicator
                .as_mut()
                .map_or(std::ptr::null_mut(), |m| m.as_mut_slice().as_mut_ptr()),
            rows,
            dim,
            _model: PhantomData,
        }
    }

    #[inline]
    pub fn contains(&self, id: u32) -> bool {
        (id as usize) < self.rows
    }

    #[inline]
    unsafe fn row(&self, base: *mut f32, id: u32) -> &'a mut [f32] {
        debug_assert!(self.contains(id));
        std::slice::from_raw_parts_mut(base.add(id as usize * self.dim), self.dim)
    }

    /// # Safety
    /// `id` must be in range and the caller must not hold another reference
    /// to the same row.
    #[inline]
    pub unsafe fn input(&self, id: u32) -> &'a mut [f32] {
        self.row(self.input, id)
    }

    /// # Safety
    /// As for [`RawParams::input`].
    #[inline]
    pub unsafe fn output(&self, id: u32) -> &'a mut [f32] {
        self.row(self.output, id)
    }

    /// # Safety
    /// As for [`RawParams::input`]; the indicator matrix must exist.
    #[inline]
    pub unsafe fn indicator(&self, id: u32) -> &'a mut [f32] {
        debug_assert!(!self.indicator.is_null());
        self.row(self.indicator, id)
    }
}
