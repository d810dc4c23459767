"""Test package for rabi-emission"""
