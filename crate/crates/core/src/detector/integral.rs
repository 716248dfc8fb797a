use crate::imaging::Image;

/// Summed-area tables of a grayscale image, `(width+1) x (height+1)`, with a
/// zero first row and column.
#[derive(Debug, Clone)]
pub struct IntegralImage {
    width: u32,
    height: u32,
    sum: Vec<u64>,
    sqsum: Vec<u64>,
}

impl IntegralImage {
    /// Builds the tables from the luma of `img` (RGB input is converted first).
    pub fn new(img: &Image) -> Self {
        let gray = img.to_grayscale();
        let (w, h) = (gray.width() as usize, gray.height() as usize);
        let stride = w + 1;
        let mut sum = vec![0u64; stride * (h + 1)];
        let mut sqsum = vec![0u64; stride * (h + 1)];
        let px = gray.samples();
        for y in 0..h {
            let (mut row, mut row_sq) = (0u64, 0u64);
            for x in 0..w {
                let v = px[y * w + x] as u64;
                row += v;
                row_sq += v * v;
                let i = (y + 1) * stride + x + 1;
                sum[i] = sum[i - stride] + row;
                sqsum[i] = sqsum[i - stride] + row_sq;
            }
        }
        IntegralImage { width: w as u32, height: h as u32, sum, sqsum }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Cumulative sum of all pixels above and left of `(x, y)`.
    #[inline]
    pub fn at(&self, x: u32, y: u32) -> u64 {
        self.sum[y as usize * (self.width as usize + 1) + x as usize]
    }

    #[inline]
    fn corners(table: &[u64], stride: usize, x: u32, y: u32, w: u32, h: u32) -> u64 {
        let (x0, y0) = (x as usize, y as usize);
        let (x1, y1) = (x0 + w as usize, y0 + h as usize);
        table[y1 * stride + x1] + table[y0 * stride + x0] - table[y0 * stride + x1] - table[y1 * stride + x0]
    }

    /// Exact pixel sum over `[x, x+w) x [y, y+h)`; the rectangle must lie inside the image.
    #[inline]
    pub fn rect_sum(&self, x: u32, y: u32, w: u32, h: u32) -> u64 {
        debug_assert!(x + w <= self.width && y + h <= self.height);
        Self::corners(&self.sum, self.width as usize + 1, x, y, w, h)
    }

    /// Exact sum of squared pixels over the same rectangle.
    #[inline]
    pub fn rect_sqsum(&self, x: u32, y: u32, w: u32, h: u32) -> u64 {
        debug_assert!(x + w <= self.width && y + h <= self.height);
        Self::corners(&self.sqsum, self.width as usize + 1, x, y, w, h)
    }
}
