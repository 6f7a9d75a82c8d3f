#include "geoinsure/ledger.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace geoinsure {

GateLedger::GateLedger(std::vector<double> ingressCaps, std::vector<double> egressCaps)
    : ingressCap_(std::move(ingressCaps)), egressCap_(std::move(egressCaps)) {
  if (ingressCap_.size() != egressCap_.size()) throw std::invalid_argument("gate cap vectors differ in length");
  ingressUsed_.assign(ingressCap_.size(), 0.0);
  egressUsed_.assign(egressCap_.size(), 0.0);
}

GateCheck GateLedger::check(const GateDemand& demand) const {
  if (demand.ingress > 0 && !withinCap(ingressUsed_.at(demand.destination) + demand.ingress,
                                       ingressCap_.at(demand.destination)))
    return GateCheck::Ingress;
  for (const auto& [source, amount] : demand.egress)
    if (amount > 0 && !withinCap(egressUsed_.at(source) + amount, egressCap_.at(source))) return GateCheck::Egress;
  return GateCheck::Ok;
}

void GateLedger::reserve(CopyId copy, const GateDemand& demand) {
  if (reservations_.contains(copy)) throw std::logic_error("copy " + std::to_string(copy) + " already reserved");
  if (check(demand) != GateCheck::Ok) throw std::logic_error("reservation exceeds gate capacity");
  ingressUsed_.at(demand.destination) += demand.ingress;
  for (const auto& [source, amount] : demand.egress) egressUsed_.at(source) += amount;
  reservations_.emplace(copy, demand);
}

void GateLedger::release(CopyId copy) {
  auto it = reservations_.find(copy);
  if (it == reservations_.end()) throw std::logic_error("copy " + std::to_string(copy) + " holds no reservation");
  auto settle = [](double& used, double amount) {
    used -= amount;
    if (std::abs(used) < 1e-9) used = 0;
  };
  settle(ingressUsed_.at(it->second.destination), it->second.ingress);
  for (const auto& [source, amount] : it->second.egress) settle(egressUsed_.at(source), amount);
  reservations_.erase(it);
}

}  // namespace geoinsure
