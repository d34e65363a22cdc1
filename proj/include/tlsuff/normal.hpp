#pragma once

namespace tlsuff {

// Standard normal CDF via erfc; absolute error below 1e-15.
double normal_cdf(double x);

// Inverse CDF: Wichura's rational approximation refined by one Newton step
// on the CDF. Throws DomainError for q outside (0,1).
double normal_quantile(double q);

}  // namespace tlsuff
