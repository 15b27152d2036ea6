//! Per-domain entity tables and constraint queries.

use std::collections::BTreeMap;

use crate::error::ModelError;
use crate::model::{normalize_value, DomainId, DONTCARE};
use crate::ontology::Ontology;

pub type Entity = BTreeMap<String, String>;

/// Entity tables keyed by domain, bound to the ontology that types them.
#[derive(Debug, Clone, PartialEq)]
pub struct Database {
    ontology: Ontology,
    tables: BTreeMap<DomainId, Vec<Entity>>,
}

impl Database {
    /// Builds a database. Every entity-bearing domain gets a table (possibly
    /// empty); tables for unknown or non-entity-bearing domains are rejected,
    /// as are entities missing the domain's key slot.
    pub fn new(
        ontology: Ontology,
        mut tables: BTreeMap<DomainId, Vec<Entity>>,
    ) -> Result<Self, ModelError> {
        ontology.check()?;
        for (domain, rows) in &tables {
            let schema = ontology.schema(domain.as_str())?;
            if !schema.entity_bearing {
                return Err(ModelError::Invalid(format!(
                    "domain {domain} has no database table"
                )));
            }
            if let Some(pos) = rows.iter().position(|e| !e.contains_key(&schema.key)) {
                return Err(ModelError::Invalid(format!(
                    "{domain} entity #{pos} lacks key slot {:?}",
                    schema.key
                )));
            }
        }
        for (domain, schema) in &ontology.domains {
            if schema.entity_bearing {
                tables.entry(domain.clone()).or_default();
            }
        }
        Ok(Database { ontology, tables })
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn tables(&self) -> &BTreeMap<DomainId, Vec<Entity>> {
        &self.tables
    }

    pub fn table(&self, domain: &str) -> Result<&[Entity], ModelError> {
        self.tables
            .get(domain)
            .map(Vec::as_slice)
            .ok_or_else(|| ModelError::UnknownDomain(domain.to_string()))
    }

    /// Row indices matching every constraint, in table order.
    pub fn query_indices(
        &self,
        domain: &str,
        constraints: &BTreeMap<String, String>,
    ) -> Result<Vec<usize>, ModelError> {
        let schema = self.ontology.schema(domain)?;
        let rows = self.table(domain)?;
        let mut wanted = Vec::with_capacity(constraints.len());
        for (slot, value) in constraints {
            if !schema.is_informable(slot) {
                return Err(ModelError::UnknownSlot {
                    domain: domain.to_string(),
                    slot: slot.clone(),
                });
            }
            let value = normalize_value(value);
            if value != DONTCARE {
                wanted.push((slot.as_str(), value));
            }
        }
        Ok(rows
            .iter()
            .enumerate()
            .filter(|(_, entity)| {
                wanted.iter().all(|(slot, value)| {
                    entity
                        .get(*slot)
                        .is_some_and(|v| normalize_value(v) == *value)
                })
            })
            .map(|(i, _)| i)
            .collect())
    }

    pub fn query(
        &self,
        domain: &str,
        constraints: &BTreeMap<String, String>,
    ) -> Result<Vec<&Entity>, ModelError> {
        let rows = self.table(domain)?;
        Ok(self
            .query_indices(domain, constraints)?
            .into_iter()
            .map(|i| &rows[i])
            .collect())
    }

    /// Key-slot value (name, or train id) of row `index`.
    pub fn entity_key(&self, domain: &str, index: usize) -> Option<&str> {
        let key = &self.ontology.domains.get(domain)?.key;
        self.tables.get(domain)?.get(index)?.get(key).map(String::as_str)
    }
}

pub fn query<'a>(
    db: &'a Database,
    domain: &str,
    constraints: &BTreeMap<String, String>,
) -> Result<Vec<&'a Entity>, ModelError> {
    db.query(domain, constraints)
}
