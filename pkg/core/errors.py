#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# Fibrosis-Risk-Toolkit
# Copyright (C) 2026  Fibrosis-Risk-Toolkit contributors
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

"""Exception hierarchy shared by every module."""


class FibrosisError(Exception):
    """Base error, carries the process exit code used by the command line."""

    exit_code = 2


class UsageError(FibrosisError):
    """Bad command line usage or refused operation."""

    exit_code = 1


class ConfigError(UsageError):
    """Invalid or unknown configuration value."""


class DataError(FibrosisError):
    """Input data is malformed or inconsistent."""

    exit_code = 2


class NumericError(FibrosisError):
    """A numeric procedure failed."""

    exit_code = 3


# volume_io
class VolumeFormatError(DataError):
    """Volume file cannot be decoded."""


class TruncatedFile(VolumeFormatError):
    """Fewer bytes than header plus declared data."""


class BadMagic(VolumeFormatError):
    """Magic string is not the single-file one."""


class BadHeader(VolumeFormatError):
    """Header fields are inconsistent."""


class UnsupportedDatatype(VolumeFormatError):
    """Datatype code outside the supported set."""


class UnsupportedDim(VolumeFormatError):
    """Volume is not three dimensional."""


class UnsupportedEncoding(VolumeFormatError):
    """Compressed input."""


class NonFiniteData(VolumeFormatError):
    """NaN or infinite voxel values."""


class DimensionMismatch(DataError):
    """Volume and mask grids differ."""


class EmptyMask(DataError):
    """Mask has no true voxel."""


# phantom
class InvalidSpec(DataError):
    """Phantom specification violates its invariants."""


class IoFailure(DataError):
    """Reading or writing a file failed."""


# learners
class SchemaError(DataError):
    """Table header or content does not match the expected schema."""


class SingleClass(DataError):
    """Only one class present where both are required."""


class TooFewSamples(DataError):
    """Not enough samples per class for the requested split."""


# nnet
class ShapeMismatch(DataError):
    """Tensor shapes are incompatible."""


class EmptyList(DataError):
    """Empty input list."""


class NonFiniteLoss(NumericError):
    """Loss or parameters became NaN or infinite."""


class ConvergenceError(NumericError):
    """Optimiser broke one of its monotonicity guarantees."""


class NonFiniteFeature(NumericError):
    """A feature value came out NaN or infinite."""
