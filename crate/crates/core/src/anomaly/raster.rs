//! 3-d raster scan between latent grids and 1-d token sequences.
//!
//! The order is lexicographic: depth slowest, width fastest.

use ndarray::Array3;

use crate::error::{CoreError, Result};

/// A 1-d token raster plus the grid shape it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<usize>,
    pub grid_shape: (usize, usize, usize),
}

impl TokenSequence {
    pub fn new(tokens: Vec<usize>, grid_shape: (usize, usize, usize)) -> Result<Self> {
        let (d, h, w) = grid_shape;
        if tokens.len() != d * h * w {
            return Err(CoreError::Contract(format!(
                "token count {} does not match grid shape {:?}",
                tokens.len(),
                grid_shape
            )));
        }
        Ok(TokenSequence { tokens, grid_shape })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Flatten a latent index grid into a token sequence.
pub fn rasterize(grid: &Array3<usize>) -> TokenSequence {
    let (d, h, w) = grid.dim();
    let tokens = grid
        .as_standard_layout()
        .iter()
        .copied()
        .collect::<Vec<usize>>();
    TokenSequence {
        tokens,
        grid_shape: (d, h, w),
    }
}

/// Rebuild the latent grid from a token sequence.
pub fn derasterize(seq: &TokenSequence) -> Result<Array3<usize>> {
    let (d, h, w) = seq.grid_shape;
    Array3::from_shape_vec((d, h, w), seq.tokens.clone()).map_err(|_| {
        CoreError::Contract(format!(
            "sequence length {} does not match grid shape {:?}",
            seq.tokens.len(),
            seq.grid_shape
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_order() {
        let grid = Array3::from_shape_vec((2, 2, 2), (0..8).collect()).unwrap();
        let seq = rasterize(&grid);
        assert_eq!(seq.tokens, vec![0, 1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn single_cell() {
        let grid = Array3::from_shape_vec((1, 1, 1), vec![5]).unwrap();
        let seq = rasterize(&grid);
        assert_eq!(seq.len(), 1);
        assert_eq!(derasterize(&seq).unwrap(), grid);
    }

    #[test]
    fn mismatched_length_rejected() {
        let seq = TokenSequence {
            tokens: vec![0, 1, 2],
            grid_shape: (2, 2, 2),
        };
        assert!(derasterize(&seq).is_err());
        assert!(TokenSequence::new(vec![0, 1, 2], (2, 2, 2)).is_err());
    }
}
