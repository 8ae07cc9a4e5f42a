use std::time::Instant;
use wdsco_core::*;

fn main() {
    let mut row = vec![0.0; 13];
    for tau in 8..=12 { row[tau] = 0.2; }
    let demand = QuantizedDemandModel::new(0.1, vec![row]).unwrap();
    let price = PriceModel::single_phase(20.0, 10.0).unwrap();
    let spec = ChainSpec::new(96, 12, 84, 0, 20, 0.1, 1).unwrap();
    let policy = ThresholdPolicy::uniform(20.0, &spec).unwrap();
    let params = CostParams::new(1.0, 0.0, CapitalCost::PerUnit(10_000.0)).unwrap();

    let t = Instant::now();
    let mut total = 0.0;
    for _ in 0..2000 {
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        let pi = stationary(&chain).unwrap();
        total += expected_operating_cost(&pi, &policy, &price, &spec, &params).unwrap().total_per_interval;
    }
    println!("full path (validated+scc): {:.1?}/eval (sink {total})", t.elapsed() / 2000);
}
