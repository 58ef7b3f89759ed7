#pragma once

#include <ostream>
#include <string>

#include "gaitlab/dynamics.hpp"

namespace gaitlab {

/// Streams simulation states as CSV: t,q0..qN,qd0..qdN,tau0..tauM,Fl,Fr.
class TrajectoryDump {
 public:
  TrajectoryDump(std::ostream& out, const RobotModel& model);
  void write(const SimState& state);
  static std::string header(const RobotModel& model);

 private:
  std::ostream& out_;
  int dofs_;
  int joints_;
  int feet_;
};

}  // namespace gaitlab
