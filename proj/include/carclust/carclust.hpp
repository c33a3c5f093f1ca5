#ifndef CARCLUST_CARCLUST_HPP
#define CARCLUST_CARCLUST_HPP

#include "car_model.hpp"
#include "diagnostics.hpp"
#include "errors.hpp"
#include "estimator.hpp"
#include "io.hpp"
#include "panel.hpp"
#include "report.hpp"
#include "selection.hpp"
#include "synthetic.hpp"

#endif
