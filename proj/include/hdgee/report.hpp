#pragma once

#include <iosfwd>

#include "hdgee/estimator.hpp"
#include "hdgee/regularity.hpp"

namespace hdgee {

/// Key-value fit report with a fixed field order.
void write_fit_report(std::ostream& out, const FitResult& fit, const ClusteredDataset& data,
                      const MarginalModel& model, StructureKind kind, double alpha,
                      const RegularityReport& regularity);

}  // namespace hdgee
