//! CSV, JSON and SVG writers for command outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use num_complex::Complex64;
use planeq::equilibrium::SupportGeometry;
use serde::Serialize;

/// Output directory; records every file written.
pub struct OutDir {
    root: PathBuf,
    pub written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn record(&mut self, name: &str) -> PathBuf {
        let p = self.path(name);
        self.written.push(p.clone());
        p
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let p = self.record(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    pub fn csv<R: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = R>) -> anyhow::Result<()> {
        let p = self.record(name);
        let mut w = csv::Writer::from_path(&p).with_context(|| format!("writing {}", p.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn svg(&mut self, name: &str, doc: &Svg) -> anyhow::Result<()> {
        let p = self.record(name);
        fs::write(&p, doc.finish()).with_context(|| format!("writing {}", p.display()))
    }

    pub fn bytes_path(&mut self, name: &str) -> PathBuf {
        self.record(name)
    }
}

#[derive(Serialize)]
pub struct PointRow {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for PointRow {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

/// Boundary point tagged with the curve it belongs to.
#[derive(Serialize)]
pub struct CurveRow {
    pub curve: usize,
    pub re: f64,
    pub im: f64,
}

/// Closed boundary curves of the support, outer curve first.
pub fn boundary_curves(geom: &SupportGeometry, samples: usize) -> Vec<Vec<Complex64>> {
    let circle = |c: Complex64, r: f64| {
        (0..samples)
            .map(|k| c + Complex64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / samples as f64))
            .collect::<Vec<_>>()
    };
    match geom {
        SupportGeometry::DiskCavities { outer, cavities } => std::iter::once(circle(Complex64::new(0.0, 0.0), *outer))
            .chain(cavities.iter().map(|c| circle(c.center, c.radius)))
            .collect(),
        SupportGeometry::ExteriorMap(m) => vec![m.boundary_samples(samples)],
    }
}

pub fn curve_rows(curves: &[Vec<Complex64>]) -> Vec<CurveRow> {
    curves
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |z| CurveRow { curve: i, re: z.re, im: z.im }))
        .collect()
}

/// Minimal SVG canvas over a square window of the complex plane.
pub struct Svg {
    center: Complex64,
    half: f64,
    body: String,
}

const PX: f64 = 600.0;

impl Svg {
    pub fn new(center: Complex64, half_width: f64) -> Self {
        Self {
            center,
            half: half_width,
            body: String::new(),
        }
    }

    fn xy(&self, z: Complex64) -> (f64, f64) {
        let s = PX / (2.0 * self.half);
        ((z.re - self.center.re + self.half) * s, (self.center.im - z.im + self.half) * s)
    }

    fn path_data(&self, pts: &[Complex64], closed: bool) -> String {
        let mut d = String::new();
        for (i, &z) in pts.iter().enumerate() {
            let (x, y) = self.xy(z);
            let _ = write!(d, "{}{:.3},{:.3} ", if i == 0 { "M" } else { "L" }, x, y);
        }
        if closed {
            d.push('Z');
        }
        d
    }

    /// Filled region bounded by `curves` with the even-odd rule.
    pub fn region(&mut self, curves: &[Vec<Complex64>], fill: &str) {
        let d: String = curves.iter().map(|c| self.path_data(c, true)).collect::<Vec<_>>().join(" ");
        let _ = writeln!(self.body, r#"<path d="{d}" fill="{fill}" fill-rule="evenodd" stroke="black" stroke-width="0.8"/>"#);
    }

    pub fn polyline(&mut self, pts: &[Complex64], stroke: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let d = self.path_data(pts, false);
        let _ = writeln!(self.body, r#"<path d="{d}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#);
    }

    pub fn dots(&mut self, pts: &[Complex64], fill: &str, radius: f64) {
        for &z in pts {
            let (x, y) = self.xy(z);
            let _ = writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{radius}" fill="{fill}"/>"#);
        }
    }

    pub fn marker(&mut self, z: Complex64, stroke: &str) {
        let (x, y) = self.xy(z);
        let _ = writeln!(
            self.body,
            r#"<path d="M{:.3},{:.3} L{:.3},{:.3} M{:.3},{:.3} L{:.3},{:.3}" stroke="{stroke}" stroke-width="1.5"/>"#,
            x - 5.0,
            y - 5.0,
            x + 5.0,
            y + 5.0,
            x - 5.0,
            y + 5.0,
            x + 5.0,
            y - 5.0
        );
    }

    pub fn finish(&self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PX}\" height=\"{PX}\" viewBox=\"0 0 {PX} {PX}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

/// Window centred at the origin containing the support with some margin.
pub fn window_for(geom: &SupportGeometry) -> Svg {
    let reach = boundary_curves(geom, 256)
        .iter()
        .flatten()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Svg::new(Complex64::new(0.0, 0.0), 1.15 * reach.max(1e-3))
}
