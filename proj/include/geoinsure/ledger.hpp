#pragma once

#include <unordered_map>
#include <vector>

#include "geoinsure/types.hpp"

namespace geoinsure {

enum class GateCheck { Ok, Ingress, Egress };

/// Per-cluster reserved ingress/egress bandwidth and the reservation each
/// live copy holds. Reservations are released exactly once.
class GateLedger {
 public:
  GateLedger() = default;
  GateLedger(std::vector<double> ingressCaps, std::vector<double> egressCaps);

  GateCheck check(const GateDemand& demand) const;
  /// Throws std::logic_error if the demand does not fit or the id is taken.
  void reserve(CopyId copy, const GateDemand& demand);
  /// Throws std::logic_error if `copy` holds no reservation.
  void release(CopyId copy);
  bool holds(CopyId copy) const { return reservations_.contains(copy); }

  double ingressUsed(ClusterId k) const { return ingressUsed_.at(k); }
  double egressUsed(ClusterId k) const { return egressUsed_.at(k); }
  double ingressCap(ClusterId k) const { return ingressCap_.at(k); }
  double egressCap(ClusterId k) const { return egressCap_.at(k); }
  double ingressHeadroom(ClusterId k) const { return ingressCap_.at(k) - ingressUsed_.at(k); }
  double egressHeadroom(ClusterId k) const { return egressCap_.at(k) - egressUsed_.at(k); }
  std::size_t clusterCount() const { return ingressCap_.size(); }
  std::size_t activeReservations() const { return reservations_.size(); }

 private:
  std::vector<double> ingressCap_, egressCap_;
  std::vector<double> ingressUsed_, egressUsed_;
  std::unordered_map<CopyId, GateDemand> reservations_;
};

/// Slack allowed when comparing accumulated reservations against caps.
inline bool withinCap(double used, double cap) { return used <= cap * (1 + 1e-12) + 1e-9; }

}  // namespace geoinsure
