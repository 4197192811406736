//! Sample inputs shipped with the crate.

use crate::dsl::{parse_domain_named, parse_problem, DslError};
use crate::ontology::{load_rules, load_taxonomy, OntologyError, SeverityRule, TaxonomyGraph};
use crate::planner::{PlanError, PlanningProblem};
use crate::registry::{load_registry, Registry, RegistryError};
use crate::scenario::{load_roster, load_schedule, Dispatcher, Roster, RouteSchedule, ScenarioError};

pub const EMERGENCY_DOMAIN: &str = include_str!("../data/emergency.fcd");
pub const EMERGENCY_PROBLEM: &str = include_str!("../data/emergency.fcp");
pub const UNSOLVABLE_PROBLEM: &str = include_str!("../data/unsolvable.fcp");
pub const DOMAIN_TAXONOMY: &str = include_str!("../data/domain.tax");
pub const CLOUD_TAXONOMY: &str = include_str!("../data/cloud.tax");
pub const SEVERITY_RULES: &str = include_str!("../data/severity.rules");
pub const SERVICES: &str = include_str!("../data/services.reg");
pub const ROSTER: &str = include_str!("../data/roster.csv");
pub const ROUTE: &str = include_str!("../data/route.sched");
pub const SCENARIO: &str = include_str!("../data/emergency.scenario");

pub fn emergency_problem() -> Result<PlanningProblem, PlanError> {
    let domain = parse_domain_named("emergency.fcd", EMERGENCY_DOMAIN).expect("bundled domain parses");
    let problem = parse_problem(EMERGENCY_PROBLEM).expect("bundled problem parses");
    PlanningProblem::from_files(&domain, &problem)
}

pub fn taxonomy() -> Result<TaxonomyGraph, OntologyError> {
    load_taxonomy(DOMAIN_TAXONOMY)
}

pub fn rules(g: &TaxonomyGraph) -> Result<Vec<SeverityRule>, OntologyError> {
    load_rules(SEVERITY_RULES, Some(g))
}

pub fn registry(g: &TaxonomyGraph) -> Result<Registry, RegistryError> {
    load_registry(SERVICES, g)
}

pub fn roster() -> Result<Roster, ScenarioError> {
    load_roster(ROSTER)
}

pub fn schedule() -> Result<RouteSchedule, ScenarioError> {
    load_schedule(ROUTE)
}

/// Dispatcher over all bundled files.
pub fn dispatcher() -> Dispatcher {
    let g = taxonomy().expect("bundled taxonomy loads");
    let rules = rules(&g).expect("bundled rules load");
    let reg = registry(&g).expect("bundled registry loads");
    Dispatcher::new(g, rules, reg, roster().expect("bundled roster loads"), schedule().expect("bundled schedule loads"))
}

/// Parses the bundled domain, for callers that want the [`DslError`].
pub fn emergency_domain() -> Result<crate::dsl::DomainFile, DslError> {
    parse_domain_named("emergency.fcd", EMERGENCY_DOMAIN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{plan, SearchConfig};

    #[test]
    fn bundled_files_load() {
        let g = taxonomy().unwrap();
        assert!(load_taxonomy(CLOUD_TAXONOMY).unwrap().is_subsumed_by("Compute", "Cloud").unwrap());
        assert_eq!(rules(&g).unwrap().len(), 6);
        assert_eq!(registry(&g).unwrap().len(), 3);
        assert_eq!(roster().unwrap().passengers().len(), 8);
        assert_eq!(schedule().unwrap().stops().len(), 8);
    }

    #[test]
    fn bundled_plan() {
        let p = emergency_problem().unwrap();
        let got = plan(&p, &SearchConfig::default()).unwrap();
        assert_eq!(got.listing(), "1. findResource(doctor,orthopedics)\n2. notifyResource(#n1,#c1,help)\n");
    }
}
