#pragma once

// httplib pulls in <resolv.h>, whose `_res` macro breaks Eigen headers that
// are parsed after it. Eigen goes first.
#include <Eigen/Dense>

#include <httplib.h>
