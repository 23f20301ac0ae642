use horizonlab_core::dynamics::*;
use horizonlab_core::landscape::*;

fn main() {
    // limit cycle dt=0.5
    let lc = SystemSpec::limit_cycle().with_hopf_normal_form(true);
    let att = integrate(&lc, &[1.0, 0.0], 0.5, 120, Method::Dopri5).unwrap();
    let states: Vec<Vec<f64>> = (60..70).map(|i| att.row(i).to_vec()).collect();
    for eps in [5e-3, 1e-2, 2e-2] {
        let f = |x: &[f64]| -> horizonlab_core::Result<Vec<f64>> {
            Ok(integrate(&lc, x, 0.5, 1, Method::Dopri5)?.row(1).to_vec())
        };
        let c = epsilon_region_check_with(f, &lc, 0.5, &states, eps, 6, 13).unwrap();
        println!("LC dt=0.5 eps={eps}: dev={:.3e} eps2={:.3e} ratio={:.3} pass={}", c.max_deviation, eps*eps, c.max_deviation/(eps*eps), c.pass);
    }
    // lorenz dt=0.04
    let lo = SystemSpec::lorenz();
    let att = integrate(&lo, &[1.0,1.0,1.0], 0.04, 600, Method::Dopri5).unwrap();
    let states: Vec<Vec<f64>> = (300..310).map(|i| att.row(i).to_vec()).collect();
    for eps in [1e-2, 2e-2] {
        let f = |x: &[f64]| -> horizonlab_core::Result<Vec<f64>> {
            Ok(integrate(&lo, x, 0.04, 1, Method::Dopri5)?.row(1).to_vec())
        };
        let c = epsilon_region_check_with(f, &lo, 0.04, &states, eps, 6, 13).unwrap();
        println!("Lorenz dt=0.04 eps={eps}: dev={:.3e} eps2={:.3e} ratio={:.3} pass={}", c.max_deviation, eps*eps, c.max_deviation/(eps*eps), c.pass);
    }
}
