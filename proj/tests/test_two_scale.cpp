#include "homog/two_scale.hpp"

#include <gtest/gtest.h>

using namespace homog;

TEST(TwoScale, LaminateDecoupledPairSolvesCoupledSystem) {
  TwoScaleOptions o;
  o.base_cells = 64;
  o.cell.modes = 32;
  const auto r = two_scale_residual(ManifoldModel<2>::flat(), TensorField<2>::preset("laminate"), o);
  EXPECT_LT(r.residual, 1e-6);
  RecordProperty("base_residual", std::to_string(r.base_residual));
  RecordProperty("fiber_residual", std::to_string(r.fiber_residual));
  EXPECT_GT(r.tests, 100000u);
  EXPECT_GT(r.energy, 0.0);
}

TEST(TwoScale, ConstantTensorReducesToHomogenizedResidual) {
  Mat<2> a;
  a << 2.0, 0.3, 0.3, 1.0;
  TwoScaleOptions o;
  o.base_cells = 32;
  o.cell.modes = 8;
  const auto r = two_scale_residual(ManifoldModel<2>::flat(), TensorField<2>::constant(a), o);
  // u1 = 0, so the fiber tests see only roundoff
  EXPECT_LT(r.fiber_residual, 1e-14);
  EXPECT_LT(r.base_residual, 1e-9);
}

TEST(TwoScale, BaseDependentTensorOnWarpedModel) {
  TwoScaleOptions o;
  o.base_cells = 16;
  o.cell.modes = 8;
  o.test_band = 2;
  const auto r = two_scale_residual(ManifoldModel<2>::from_preset("warped"), TensorField<2>::preset("modulated-laminate"), o);
  EXPECT_LT(r.residual, 1e-6);
}
