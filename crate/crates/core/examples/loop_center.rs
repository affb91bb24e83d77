//! Robust center of a set of visited locations, as used for tight loops.

use rfmpos::model::Location;
use rfmpos::positioner::mcd_center;

fn main() -> rfmpos::Result<()> {
    let mut pts = vec![
        Location::new(4.00, 2.00),
        Location::new(4.01, 2.00),
        Location::new(4.01, 2.01),
        Location::new(4.00, 2.01),
        Location::new(4.02, 2.02),
    ];
    println!("tight loop center: {:?}", mcd_center(&pts, None)?);
    pts.push(Location::new(30.0, 15.0));
    let mean = Location::new(
        pts.iter().map(|p| p.x).sum::<f64>() / pts.len() as f64,
        pts.iter().map(|p| p.y).sum::<f64>() / pts.len() as f64,
    );
    println!("with a stray point: mcd {:?}, plain mean {:?}", mcd_center(&pts, None)?, mean);
    Ok(())
}
