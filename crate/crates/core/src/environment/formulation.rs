//! Composed formulation over a decision unit: revenue and penalty as sums
//! over contracts of the per-entity output volumes.

use std::collections::HashMap;

use crate::contracts::{penalty_value, DecisionUnit, PenaltyKind};
use crate::entities::EntityKind;
use crate::error::{Error, Result};

/// Per-slot variables of the composed formulation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FormulationVars {
    /// Energy each entity puts out per slot (negative when it draws).
    pub vout: HashMap<String, Vec<f64>>,
    /// Committed energy per `(contractor, contractee)` per slot.
    pub committed: HashMap<(String, String), Vec<f64>>,
}

impl FormulationVars {
    pub fn with_vout(mut self, entity: &str, values: Vec<f64>) -> Self {
        self.vout.insert(entity.to_string(), values);
        self
    }

    pub fn with_committed(mut self, contractor: &str, contractee: &str, values: Vec<f64>) -> Self {
        self.committed.insert((contractor.to_string(), contractee.to_string()), values);
        self
    }

    fn vout_of(&self, name: &str) -> Result<&[f64]> {
        self.vout.get(name).map(Vec::as_slice).ok_or_else(|| Error::MissingVariable(format!("vout[{name}]")))
    }
}

/// `revenue_t = Σ_contracts vout_t(contractor) · price_t(contractee)` over
/// contracts into priced entities. Contracts into a market without a price
/// series are an error; other unpriced contractees contribute nothing.
pub fn compose_revenue(
    du: &DecisionUnit,
    vars: &FormulationVars,
    prices: &HashMap<String, Vec<f64>>,
) -> Result<Vec<f64>> {
    let mut revenue: Option<Vec<f64>> = None;
    for c in &du.contracts {
        let price = match prices.get(&c.contractee) {
            Some(p) => p,
            None if du.get(&c.contractee)?.kind() == EntityKind::Market => {
                return Err(Error::MissingVariable(format!("price[{}]", c.contractee)))
            }
            None => continue,
        };
        let vout = vars.vout_of(&c.contractor)?;
        if vout.len() != price.len() {
            return Err(Error::LengthMismatch { left: vout.len(), right: price.len() });
        }
        let acc = revenue.get_or_insert_with(|| vec![0.0; vout.len()]);
        if acc.len() != vout.len() {
            return Err(Error::LengthMismatch { left: acc.len(), right: vout.len() });
        }
        for (r, (v, p)) in acc.iter_mut().zip(vout.iter().zip(price)) {
            *r += v * p;
        }
    }
    Ok(revenue.unwrap_or_default())
}

/// Sum of each contract's penalty on its contractor's output against the
/// committed volume.
pub fn compose_penalty(du: &DecisionUnit, vars: &FormulationVars) -> Result<f64> {
    let mut total = 0.0;
    for c in &du.contracts {
        if c.penalty.kind == PenaltyKind::None {
            continue;
        }
        let supplied = vars.vout_of(&c.contractor)?;
        let committed = vars
            .committed
            .get(&(c.contractor.clone(), c.contractee.clone()))
            .ok_or_else(|| Error::MissingVariable(format!("cv[{}->{}]", c.contractor, c.contractee)))?;
        let spd = du.granularity_min.map_or(supplied.len(), |g| (1440 / g) as usize);
        total += penalty_value(&c.penalty, supplied, committed, spd)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::{build_decision_units, Contract, PenaltyFn};
    use crate::entities::{ConsumerEntity, Entity, MarketEntity, SourceEntity};
    use crate::timeseries::{TimeSeries, Timestamp};

    fn ts() -> TimeSeries {
        TimeSeries::new(Timestamp::ymd_hm(2024, 1, 1, 0, 0), 60, vec![1.0], "").unwrap()
    }

    fn market(name: &str) -> Entity {
        Entity::Market(MarketEntity {
            name: name.into(),
            schedule: None,
            price_forecast: ts(),
            price_actual: ts(),
            carbon_forecast: None,
            carbon_actual: None,
        })
    }

    fn source(name: &str) -> Entity {
        Entity::Source(SourceEntity::new(name, 10.0, ts(), None).unwrap())
    }

    fn unit(entities: Vec<Entity>, contracts: Vec<Contract>) -> DecisionUnit {
        build_decision_units(&entities, &contracts).unwrap().remove(0)
    }

    fn prices(name: &str, p: Vec<f64>) -> HashMap<String, Vec<f64>> {
        HashMap::from([(name.to_string(), p)])
    }

    #[test]
    fn revenue_examples() {
        let du = unit(vec![source("s"), market("m")], vec![Contract::new("s", "m")]);
        let vars = FormulationVars::default().with_vout("s", vec![4.0]);
        assert_eq!(compose_revenue(&du, &vars, &prices("m", vec![3.0])).unwrap(), vec![12.0]);

        let du =
            unit(vec![source("a"), source("b"), market("m")], vec![Contract::new("a", "m"), Contract::new("b", "m")]);
        let vars = FormulationVars::default().with_vout("a", vec![2.0]).with_vout("b", vec![3.0]);
        assert_eq!(compose_revenue(&du, &vars, &prices("m", vec![2.0])).unwrap(), vec![10.0]);

        let du = unit(vec![source("battery"), market("m")], vec![Contract::new("battery", "m")]);
        let vars = FormulationVars::default().with_vout("battery", vec![-5.0]);
        assert_eq!(compose_revenue(&du, &vars, &prices("m", vec![3.0])).unwrap(), vec![-15.0]);
    }

    #[test]
    fn revenue_requires_variables() {
        let du = unit(vec![source("s"), market("m")], vec![Contract::new("s", "m")]);
        assert!(matches!(
            compose_revenue(&du, &FormulationVars::default(), &prices("m", vec![1.0])),
            Err(Error::MissingVariable(_))
        ));
        let vars = FormulationVars::default().with_vout("s", vec![1.0]);
        assert!(matches!(compose_revenue(&du, &vars, &HashMap::new()), Err(Error::MissingVariable(_))));
        let zero = FormulationVars::default().with_vout("s", vec![0.0, 0.0]);
        assert_eq!(compose_revenue(&du, &zero, &prices("m", vec![5.0, -2.0])).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn penalty_examples() {
        let consumer = Entity::Consumer(ConsumerEntity::new("c", ts(), ts()).unwrap());
        let du = unit(
            vec![source("s"), consumer.clone()],
            vec![Contract::new("s", "c").with_penalty(PenaltyFn::per_step(2.0))],
        );
        let vars = FormulationVars::default().with_vout("s", vec![8.0]).with_committed("s", "c", vec![10.0]);
        assert_eq!(compose_penalty(&du, &vars).unwrap(), 4.0);
        let exact = FormulationVars::default().with_vout("s", vec![10.0]).with_committed("s", "c", vec![10.0]);
        assert_eq!(compose_penalty(&du, &exact).unwrap(), 0.0);

        let du = unit(
            vec![source("a"), source("b"), consumer],
            vec![
                Contract::new("a", "c").with_penalty(PenaltyFn::per_step(1.0)),
                Contract::new("b", "c").with_penalty(PenaltyFn::per_step(1.0)),
            ],
        );
        let vars = FormulationVars::default()
            .with_vout("a", vec![4.0])
            .with_vout("b", vec![1.0])
            .with_committed("a", "c", vec![5.0])
            .with_committed("b", "c", vec![3.0]);
        assert_eq!(compose_penalty(&du, &vars).unwrap(), 3.0);
    }

    #[test]
    fn no_penalty_contracts_cost_nothing() {
        let du = unit(vec![source("battery"), market("m")], vec![Contract::new("battery", "m")]);
        assert_eq!(compose_penalty(&du, &FormulationVars::default()).unwrap(), 0.0);
    }
}
