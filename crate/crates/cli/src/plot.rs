use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use plotters::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub train_examples: f64,
    pub mean: f64,
    pub std: f64,
}

/// Reads the `curve.csv` written by `mtd-run`, keyed by condition.
pub fn parse_curve(text: &str) -> Result<BTreeMap<String, Vec<Point>>> {
    let mut out: BTreeMap<String, Vec<Point>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        let [condition, _round, train, mean, std] = fields[..] else {
            return Err(anyhow!("line {}: expected 5 fields", i + 1));
        };
        let num = |s: &str| s.trim().parse::<f64>().with_context(|| format!("line {}: bad number {s:?}", i + 1));
        out.entry(condition.to_string()).or_default().push(Point {
            train_examples: num(train)?,
            mean: num(mean)?,
            std: num(std)?,
        });
    }
    Ok(out)
}

/// Accuracy against training-pool size, one line per condition with a
/// one-std band drawn as error bars.
pub fn learning_curve(series: &BTreeMap<String, Vec<Point>>, out: &Path) -> Result<()> {
    let points = series.values().flatten();
    let x_max = points.clone().map(|p| p.train_examples).fold(1.0, f64::max) * 1.05;
    let y_max = points.map(|p| p.mean + p.std).fold(0.1, f64::max).min(1.0) * 1.1;

    let root = SVGBackend::new(out, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Held-out accuracy by training pool size", ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..x_max, 0.0..y_max)
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc("training examples")
        .y_desc("accuracy")
        .draw()
        .map_err(|e| anyhow!("{e}"))?;

    for (i, (name, pts)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().map(|p| (p.train_examples, p.mean)), color.stroke_width(2)))
            .map_err(|e| anyhow!("{e}"))?
            .label(name.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        chart
            .draw_series(pts.iter().map(|p| {
                PathElement::new(
                    vec![(p.train_examples, (p.mean - p.std).max(0.0)), (p.train_examples, p.mean + p.std)],
                    color.stroke_width(1),
                )
            }))
            .map_err(|e| anyhow!("{e}"))?;
        chart
            .draw_series(pts.iter().map(|p| Circle::new((p.train_examples, p.mean), 3, color.filled())))
            .map_err(|e| anyhow!("{e}"))?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .position(SeriesLabelPosition::LowerRight)
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_curve_csv() {
        let text = "condition,round,train_examples,accuracy_mean,accuracy_std\nmtd,0,50.0,0.1,0.01\nmtd,1,90.0,0.2,0.02\n";
        let c = parse_curve(text).unwrap();
        assert_eq!(c["mtd"].len(), 2);
        assert_eq!(c["mtd"][1], Point { train_examples: 90.0, mean: 0.2, std: 0.02 });
        assert!(parse_curve("h\nmtd,0,x,0.1,0.0\n").is_err());
    }
}
