//! Static overlay rendering: heatmaps, boxes and lane curves composited
//! into PPM images.

use centergrid::decode::LanePolynomial;
use centergrid::Tensor;

pub struct Canvas {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

pub type Color = [u8; 3];

pub const GREEN: Color = [40, 220, 80];
pub const RED: Color = [235, 60, 50];
pub const CYAN: Color = [60, 200, 230];
pub const YELLOW: Color = [245, 220, 60];

impl Canvas {
    pub fn new(width: usize, height: usize) -> Self {
        Canvas {
            width,
            height,
            rgb: vec![20u8; width * height * 3],
        }
    }

    #[inline]
    fn put(&mut self, x: i64, y: i64, color: Color) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let at = (y as usize * self.width + x as usize) * 3;
        self.rgb[at..at + 3].copy_from_slice(&color);
    }

    /// Alpha-blends a per-cell heatmap (max over channels) upscaled by
    /// `scale`, using a black→red→yellow ramp.
    pub fn blend_heatmap(&mut self, heatmaps: &Tensor, scale: usize, tint: Color) {
        let (c, gh, gw) = (
            heatmaps.shape()[0],
            heatmaps.shape()[1],
            heatmaps.shape()[2],
        );
        for gy in 0..gh {
            for gx in 0..gw {
                let mut v = 0.0f32;
                for ch in 0..c {
                    v = v.max(heatmaps.at3(ch, gy, gx));
                }
                if v <= 0.01 {
                    continue;
                }
                let a = v.clamp(0.0, 1.0);
                for dy in 0..scale {
                    for dx in 0..scale {
                        let (x, y) = (gx * scale + dx, gy * scale + dy);
                        if x >= self.width || y >= self.height {
                            continue;
                        }
                        let at = (y * self.width + x) * 3;
                        for (slot, &t) in self.rgb[at..at + 3].iter_mut().zip(&tint) {
                            let base = *slot as f32;
                            *slot = (base * (1.0 - a * 0.8) + t as f32 * a) as u8;
                        }
                    }
                }
            }
        }
    }

    pub fn draw_box(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, color: Color) {
        let (x1, y1, x2, y2) = (
            x1.round() as i64,
            y1.round() as i64,
            x2.round() as i64,
            y2.round() as i64,
        );
        for t in 0..2i64 {
            for x in x1..=x2 {
                self.put(x, y1 + t, color);
                self.put(x, y2 - t, color);
            }
            for y in y1..=y2 {
                self.put(x1 + t, y, color);
                self.put(x2 - t, y, color);
            }
        }
    }

    pub fn draw_polyline(&mut self, points: &[[f64; 2]], color: Color) {
        for seg in points.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let steps = (len * 2.0).ceil().max(1.0) as usize;
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                let x = a[0] + t * (b[0] - a[0]);
                let y = a[1] + t * (b[1] - a[1]);
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        self.put(x.round() as i64 + dx, y.round() as i64 + dy, color);
                    }
                }
            }
        }
    }

    pub fn draw_polynomial(&mut self, poly: &LanePolynomial, color: Color) {
        let (y0, y1) = poly.y_range;
        if y1 <= y0 {
            return;
        }
        let steps = ((y1 - y0) * 2.0).ceil() as usize;
        let points: Vec<[f64; 2]> = (0..=steps)
            .map(|i| {
                let y = y0 + (y1 - y0) * i as f64 / steps as f64;
                [poly.eval(y), y]
            })
            .collect();
        self.draw_polyline(&points, color);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drawing_is_clipped() {
        let mut c = Canvas::new(32, 32);
        c.draw_box(-10.0, -10.0, 50.0, 50.0, RED);
        c.draw_polyline(&[[-5.0, -5.0], [40.0, 40.0]], CYAN);
        assert_eq!(c.rgb.len(), 32 * 32 * 3);
    }

    #[test]
    fn heatmap_blend_touches_hot_cells_only() {
        let mut m = Tensor::zeros(&[1, 4, 4]);
        m.set3(0, 1, 1, 1.0);
        let mut c = Canvas::new(16, 16);
        let before = c.rgb.clone();
        c.blend_heatmap(&m, 4, RED);
        assert_ne!(c.rgb[(5 * 16 + 5) * 3], before[(5 * 16 + 5) * 3]);
        assert_eq!(c.rgb[(14 * 16 + 14) * 3], before[(14 * 16 + 14) * 3]);
    }
}
