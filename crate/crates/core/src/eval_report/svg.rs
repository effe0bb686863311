use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::envs::AxisBox;
use crate::error::{Error, Result};

/// Plot points `(x, y, fill colour)` over the first two axes of `frame`.
pub fn render_svg(path: &Path, title: &str, frame: &AxisBox, points: &[(f64, f64, String)]) -> Result<()> {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 20.0;
    let (x0, x1) = (frame.lo[0], frame.hi[0]);
    let (y0, y1) = if frame.dim() > 1 { (frame.lo[1], frame.hi[1]) } else { (-1.0, 1.0) };
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0).max(1e-12) * SIZE;
    // SVG y grows downward.
    let sy = |y: f64| PAD + (y1 - y) / (y1 - y0).max(1e-12) * SIZE;
    let total = SIZE + 2.0 * PAD;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{}">"#, total + PAD);
    let _ = writeln!(s, r#"<text x="{PAD}" y="14" font-size="12">{title}</text>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    for (x, y, c) in points {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, sx(*x), sy(*y));
    }
    s.push_str("</svg>\n");
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
